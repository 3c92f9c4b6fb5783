//! ASCII triangle meshes: `v x y z` vertex lines followed by `f i j k`
//! face lines with 0-based indices. Anything else is rejected.

use std::fs;
use std::path::Path;

use dexfit_core::geometry::TriMesh;
use dexfit_core::math::vec3;

use super::{invalid, FormatError};
use crate::manifest::write_atomic;

pub fn mesh_to_string(mesh: &TriMesh) -> String {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0], f[1], f[2]));
    }
    out
}

pub fn save_mesh(path: &Path, mesh: &TriMesh) -> Result<(), FormatError> {
    write_atomic(path, mesh_to_string(mesh).as_bytes())?;
    Ok(())
}

pub fn mesh_from_str(text: &str) -> Result<TriMesh, FormatError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let parse = |message: &str| FormatError::Parse {
            line,
            message: message.into(),
        };
        let mut fields = raw.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coord = || -> Result<f64, FormatError> {
                    fields
                        .next()
                        .ok_or_else(|| parse("vertex needs three coordinates"))?
                        .parse()
                        .map_err(|_| parse("bad vertex coordinate"))
                };
                let (x, y, z) = (coord()?, coord()?, coord()?);
                vertices.push(vec3(x, y, z));
            }
            Some("f") => {
                let mut index = || -> Result<u32, FormatError> {
                    fields
                        .next()
                        .ok_or_else(|| parse("face needs three indices"))?
                        .parse()
                        .map_err(|_| parse("bad face index"))
                };
                faces.push([index()?, index()?, index()?]);
            }
            Some(_) => return Err(parse("expected a v or f line")),
            None => return Err(parse("blank line")),
        }
        if fields.next().is_some() {
            return Err(parse("trailing fields"));
        }
    }
    TriMesh::new(vertices, faces).map_err(|e| invalid(format!("mesh rejected: {e}")))
}

pub fn load_mesh(path: &Path) -> Result<TriMesh, FormatError> {
    mesh_from_str(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dexfit_core::synth::box_mesh;

    #[test]
    fn meshes_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("box.mesh");
        let mesh = box_mesh(vec3(0.06, 0.04, 0.05)).unwrap();
        save_mesh(&path, &mesh).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
        assert_eq!(back.faces(), mesh.faces());
    }

    #[test]
    fn odd_coordinates_survive_the_text_round_trip() {
        let mesh = TriMesh::new(
            vec![
                vec3(1.0 / 3.0, -2.5e-11, 1e20),
                vec3(0.1 + 0.2, 4.0, 5.0),
                vec3(-0.0, 7.0, 8.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let back = mesh_from_str(&mesh_to_string(&mesh)).unwrap();
        assert_eq!(back.vertices(), mesh.vertices());
    }

    #[test]
    fn loader_rejects_foreign_lines() {
        assert!(matches!(
            mesh_from_str("v 0 0 0\nvn 1 0 0\n"),
            Err(FormatError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            mesh_from_str("v 0 0 0 9\n"),
            Err(FormatError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            mesh_from_str("f 0 1 2\n"),
            // Indices out of range; the mesh constructor rejects them.
            Err(FormatError::Invalid(_))
        ));
        assert!(matches!(
            mesh_from_str("v 0 0\n"),
            Err(FormatError::Parse { line: 1, .. })
        ));
    }
}
