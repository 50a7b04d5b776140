//! Eigendecomposition cache: one JSON file per model, `<dir>/<model hash>.json`.
//! Floats are written in shortest round-trip form, so a restored decomposition
//! is bit-identical to the one that was stored.

use std::fs;
use std::path::{Path, PathBuf};

use halfrange_core::discretize::DiscreteModel;
use halfrange_core::krein::{from_eigenpairs, KreinDecomposition};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    hash: String,
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Column-major.
    vectors: Vec<f64>,
}

pub fn path_for(dir: &Path, m: &DiscreteModel) -> PathBuf {
    dir.join(format!("{}.json", m.hash()))
}

/// `None` when the file is missing, unreadable, or belongs to another model.
pub fn load(path: &Path, m: &DiscreteModel) -> Option<KreinDecomposition> {
    let text = fs::read_to_string(path).ok()?;
    let e: Entry = serde_json::from_str(&text).ok()?;
    if e.hash != m.hash() || e.dim != m.dim() || e.vectors.len() != e.dim * e.dim {
        return None;
    }
    let v = DMatrix::from_column_slice(e.dim, e.dim, &e.vectors);
    from_eigenpairs(m.clone(), e.eigenvalues, v).ok()
}

pub fn store(path: &Path, k: &KreinDecomposition) -> std::io::Result<()> {
    let e = Entry {
        hash: k.model().hash(),
        dim: k.dim(),
        eigenvalues: k.eigenvalues().to_vec(),
        vectors: k.vectors().as_slice().to_vec(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string(&e).map_err(std::io::Error::other)?;
    // write-then-rename so a concurrent reader never sees a partial file
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use halfrange_core::discretize::random_jpositive_instance;
    use halfrange_core::krein::decompose;

    #[test]
    fn round_trip_is_exact() {
        let m = random_jpositive_instance(9, 3, 0.2);
        let k = decompose(&m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = path_for(dir.path(), &m);
        store(&p, &k).unwrap();
        let back = load(&p, &m).unwrap();
        assert_eq!(back.eigenvalues(), k.eigenvalues());
        assert_eq!(back.vectors(), k.vectors());
        assert_eq!(back.p_plus(), k.p_plus());
    }

    #[test]
    fn foreign_or_corrupt_entries_are_ignored() {
        let m = random_jpositive_instance(5, 1, 0.2);
        let other = random_jpositive_instance(5, 2, 0.2);
        let dir = tempfile::tempdir().unwrap();
        let p = path_for(dir.path(), &m);
        store(&p, &decompose(&other).unwrap()).unwrap();
        assert!(load(&p, &m).is_none());
        fs::write(&p, "{ not json").unwrap();
        assert!(load(&p, &m).is_none());
    }
}
