//! ASCII OFF and ASCII / binary little-endian PLY readers, ASCII OFF writer.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "ply" => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        MeshFormat::Off => {
            let text = std::str::from_utf8(&bytes)
                .map_err(|e| Error::parse(format!("byte {}", e.valid_up_to()), "OFF file is not UTF-8"))?;
            read_off(text)
        }
        MeshFormat::Ply => read_ply(&bytes),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::parse(format!("line {line}"), format!("cannot parse '{tok}'")))
}

pub fn read_off(text: &str) -> Result<TriangleMesh> {
    let mut lines = content_lines(text);
    let (line_no, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "empty file"))?;
    let mut header_rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| Error::parse(format!("line {line_no}"), "missing OFF header"))?
        .trim()
        .to_string();
    let mut counts_line = line_no;
    if header_rest.is_empty() {
        let (no, l) = lines
            .next()
            .ok_or_else(|| Error::parse(format!("line {line_no}"), "missing counts line"))?;
        header_rest = l.to_string();
        counts_line = no;
    }
    let counts: Vec<usize> = header_rest
        .split_whitespace()
        .map(|t| parse_num(t, counts_line))
        .collect::<Result<_>>()?;
    if counts.len() < 2 {
        return Err(Error::parse(format!("line {counts_line}"), "expected vertex and face counts"));
    }
    let (n, m) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", format!("expected {n} vertices")))?;
        let xs: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| parse_num(t, no))
            .collect::<Result<_>>()?;
        if xs.len() != 3 {
            return Err(Error::parse(format!("line {no}"), "vertex needs three coordinates"));
        }
        vertices.push([xs[0], xs[1], xs[2]]);
    }

    let mut faces = Vec::with_capacity(m);
    for _ in 0..m {
        let (no, l) = lines
            .next()
            .ok_or_else(|| Error::parse("end of file", format!("expected {m} faces")))?;
        let toks: Vec<usize> = l
            .split_whitespace()
            .map(|t| parse_num(t, no))
            .collect::<Result<_>>()?;
        if toks.first() != Some(&3) || toks.len() < 4 {
            return Err(Error::parse(format!("line {no}"), "only triangular faces are supported"));
        }
        faces.push([toks[1], toks[2], toks[3]]);
    }
    TriangleMesh::new(vertices, faces)
}

/// ASCII OFF with 17 significant digits per coordinate.
pub fn write_off(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "OFF");
    let _ = writeln!(out, "{} {} 0", mesh.n_vertices(), mesh.n_faces());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
}

/// Reads vertex positions and triangle faces; other properties and elements are skipped.
pub fn read_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let mut pos = 0usize;
    let next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let start = *pos;
        let end = bytes[start..]
            .iter()
            .position(|&b| b == b'\n')
            .map_or(bytes.len(), |p| start + p);
        *pos = (end + 1).min(bytes.len());
        Some((start, String::from_utf8_lossy(&bytes[start..end]).trim().to_string()))
    };

    match next_line(&mut pos) {
        Some((_, l)) if l == "ply" => {}
        _ => return Err(Error::parse("byte 0", "missing 'ply' magic")),
    }
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (off, line) = next_line(&mut pos)
            .ok_or_else(|| Error::parse(format!("byte {pos}"), "unterminated PLY header"))?;
        let loc = format!("byte {off}");
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLe),
            ["format", other, ..] => {
                return Err(Error::parse(loc, format!("unsupported PLY format '{other}'")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(loc.clone(), "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc.clone(), "property before element"))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| Error::parse(loc.clone(), format!("unknown type '{count}'")))?;
                let item = Scalar::parse(item)
                    .ok_or_else(|| Error::parse(loc.clone(), format!("unknown type '{item}'")))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count,
                    item,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(loc.clone(), "property before element"))?;
                let ty = Scalar::parse(ty)
                    .ok_or_else(|| Error::parse(loc.clone(), format!("unknown type '{ty}'")))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty,
                });
            }
            _ => return Err(Error::parse(loc, format!("unrecognised header line '{line}'"))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse("header", "missing format line"))?;

    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    match encoding {
        PlyEncoding::Ascii => {
            let body = String::from_utf8_lossy(&bytes[pos..]);
            let header_lines = String::from_utf8_lossy(&bytes[..pos]).lines().count();
            let mut lines = body
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1 + header_lines, l.trim()))
                .filter(|(_, l)| !l.is_empty());
            for el in &elements {
                for _ in 0..el.count {
                    let (no, l) = lines.next().ok_or_else(|| {
                        Error::parse("end of file", format!("missing '{}' records", el.name))
                    })?;
                    let vals: Vec<f64> = l
                        .split_whitespace()
                        .map(|t| parse_num(t, no))
                        .collect::<Result<_>>()?;
                    let mut cursor = 0usize;
                    let take = |cursor: &mut usize| -> Result<f64> {
                        let v = *vals
                            .get(*cursor)
                            .ok_or_else(|| Error::parse(format!("line {no}"), "record too short"))?;
                        *cursor += 1;
                        Ok(v)
                    };
                    let mut record = Record::default();
                    for p in &el.props {
                        match p {
                            Property::Scalar { name, .. } => {
                                let v = take(&mut cursor)?;
                                record.scalar(name, v);
                            }
                            Property::List { name, .. } => {
                                let c = take(&mut cursor)? as usize;
                                let items = (0..c)
                                    .map(|_| take(&mut cursor))
                                    .collect::<Result<Vec<_>>>()?;
                                record.list(name, items);
                            }
                        }
                    }
                    record.commit(el, &mut vertices, &mut faces, &format!("line {no}"))?;
                }
            }
        }
        PlyEncoding::BinaryLe => {
            let mut cursor = pos;
            let read = |ty: Scalar, cursor: &mut usize| -> Result<f64> {
                let end = *cursor + ty.size();
                if end > bytes.len() {
                    return Err(Error::parse(format!("byte {}", *cursor), "unexpected end of data"));
                }
                let v = ty.read_le(&bytes[*cursor..end]);
                *cursor = end;
                Ok(v)
            };
            for el in &elements {
                for _ in 0..el.count {
                    let start = cursor;
                    let mut record = Record::default();
                    for p in &el.props {
                        match p {
                            Property::Scalar { name, ty } => {
                                let v = read(*ty, &mut cursor)?;
                                record.scalar(name, v);
                            }
                            Property::List { name, count, item } => {
                                let c = read(*count, &mut cursor)? as usize;
                                let items = (0..c)
                                    .map(|_| read(*item, &mut cursor))
                                    .collect::<Result<Vec<_>>>()?;
                                record.list(name, items);
                            }
                        }
                    }
                    record.commit(el, &mut vertices, &mut faces, &format!("byte {start}"))?;
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[derive(Default)]
struct Record {
    xyz: [Option<f64>; 3],
    indices: Option<Vec<f64>>,
}

impl Record {
    fn scalar(&mut self, name: &str, v: f64) {
        match name {
            "x" => self.xyz[0] = Some(v),
            "y" => self.xyz[1] = Some(v),
            "z" => self.xyz[2] = Some(v),
            _ => {}
        }
    }

    fn list(&mut self, name: &str, items: Vec<f64>) {
        if name == "vertex_indices" || name == "vertex_index" {
            self.indices = Some(items);
        }
    }

    fn commit(
        self,
        el: &Element,
        vertices: &mut Vec<Point3>,
        faces: &mut Vec<[usize; 3]>,
        loc: &str,
    ) -> Result<()> {
        match el.name.as_str() {
            "vertex" => match self.xyz {
                [Some(x), Some(y), Some(z)] => vertices.push([x, y, z]),
                _ => return Err(Error::parse(loc, "vertex lacks x/y/z")),
            },
            "face" => {
                let idx = self
                    .indices
                    .ok_or_else(|| Error::parse(loc, "face lacks vertex_indices"))?;
                if idx.len() != 3 {
                    return Err(Error::parse(loc, "only triangular faces are supported"));
                }
                faces.push([idx[0] as usize, idx[1] as usize, idx[2] as usize]);
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_off() {
        let mesh = read_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n").unwrap();
        assert_eq!(mesh.n_vertices(), 3);
        assert_eq!(mesh.n_faces(), 1);
    }

    #[test]
    fn off_with_comments_and_inline_counts() {
        let mesh = read_off("# hello\nOFF 3 1 0\n0 0 0\n1 0 0 # x\n0 1 0\n\n3 2 1 0\n").unwrap();
        assert_eq!(mesh.faces()[0], [2, 1, 0]);
    }

    #[test]
    fn off_index_out_of_range() {
        let err = read_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n").unwrap_err();
        assert!(matches!(err, Error::FaceIndexOutOfRange { face: 0, index: 7, .. }));
    }

    #[test]
    fn off_parse_error_names_line() {
        let err = read_off("OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert_eq!(location, "line 4"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let vertices: Vec<Point3> = (0..100)
            .map(|_| [rng.gen::<f64>() * 1e3 - 5e2, rng.gen::<f64>() * 1e-7, rng.gen::<f64>()])
            .collect();
        let faces = (0..150)
            .map(|_| [rng.gen_range(0..100), rng.gen_range(0..100), rng.gen_range(0..100)])
            .collect();
        let mesh = TriangleMesh::new(vertices, faces).unwrap();
        let back = read_off(&write_off(&mesh)).unwrap();
        assert_eq!(mesh, back);
    }

    #[test]
    fn ascii_ply() {
        let text = "ply\nformat ascii 1.0\ncomment x\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0 1\n1 0 0 2\n0 1 0 3\n3 0 1 2\n";
        let mesh = read_ply(text.as_bytes()).unwrap();
        assert_eq!(mesh.n_vertices(), 3);
        assert_eq!(mesh.vertices()[1], [1.0, 0.0, 0.0]);
        assert_eq!(mesh.faces()[0], [0, 1, 2]);
    }

    #[test]
    fn binary_ply() {
        let mut bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 3\nproperty double x\nproperty double y\nproperty double z\nelement face 1\nproperty list uchar uint vertex_indices\nend_header\n".to_vec();
        for p in [[0.0f64, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.5, 0.0]] {
            for x in p {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
        }
        bytes.push(3);
        for i in [0u32, 2, 1] {
            bytes.extend_from_slice(&i.to_le_bytes());
        }
        let mesh = read_ply(&bytes).unwrap();
        assert_eq!(mesh.vertices()[2], [0.0, 1.5, 0.0]);
        assert_eq!(mesh.faces()[0], [0, 2, 1]);
    }

    #[test]
    fn truncated_binary_ply_reports_offset() {
        let bytes = b"ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nproperty float y\nproperty float z\nend_header\n\x00\x00".to_vec();
        assert!(matches!(read_ply(&bytes), Err(Error::Parse { .. })));
    }
}
