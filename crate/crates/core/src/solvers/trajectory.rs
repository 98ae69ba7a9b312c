use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use super::{Node, SolveError, SpaceTimeGrid};

/// One or more named scalar fields sampled on a space-time grid.
///
/// Every array has shape `(space points..., time points)` and only finite
/// values; both are checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryField {
    grid: SpaceTimeGrid,
    names: Vec<String>,
    data: Vec<ArrayD<f64>>,
    provenance: serde_json::Value,
}

impl TrajectoryField {
    pub fn new(grid: SpaceTimeGrid, fields: Vec<(String, ArrayD<f64>)>) -> Result<Self, SolveError> {
        if fields.is_empty() {
            return Err(SolveError::InvalidTrajectory("no fields".into()));
        }
        let shape = grid.shape();
        let mut names = Vec::with_capacity(fields.len());
        let mut data = Vec::with_capacity(fields.len());
        for (name, arr) in fields {
            if arr.shape() != shape.as_slice() {
                return Err(SolveError::InvalidTrajectory(format!(
                    "field `{name}` has shape {:?}, grid expects {:?}",
                    arr.shape(),
                    shape
                )));
            }
            if let Some(pos) = arr.iter().position(|v| !v.is_finite()) {
                return Err(SolveError::InvalidTrajectory(format!("field `{name}` has a non-finite value at flat index {pos}")));
            }
            if names.contains(&name) {
                return Err(SolveError::InvalidTrajectory(format!("duplicate field name `{name}`")));
            }
            names.push(name);
            data.push(arr.as_standard_layout().into_owned());
        }
        Ok(TrajectoryField { grid, names, data, provenance: serde_json::Value::Null })
    }

    pub fn with_provenance(mut self, provenance: serde_json::Value) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn provenance(&self) -> &serde_json::Value {
        &self.provenance
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn field_count(&self) -> usize {
        self.data.len()
    }

    pub fn field(&self, i: usize) -> &ArrayD<f64> {
        &self.data[i]
    }

    pub fn field_by_name(&self, name: &str) -> Option<&ArrayD<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &self.data[i])
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value(&self, field: usize, node: &Node) -> f64 {
        let idx = self.grid.node_index(node);
        self.data[field][IxDyn(&idx)]
    }

    pub fn into_fields(self) -> (SpaceTimeGrid, Vec<(String, ArrayD<f64>)>) {
        (self.grid, self.names.into_iter().zip(self.data).collect())
    }

    /// Strided sub-sampling in space and time (`stride` divides nothing: the
    /// kept nodes are `0, s, 2s, ...`).
    pub fn downsample(&self, space_stride: usize, time_stride: usize) -> Result<Self, SolveError> {
        if space_stride == 0 || time_stride == 0 {
            return Err(SolveError::InvalidTrajectory("strides must be positive".into()));
        }
        let d = self.grid.space_dim();
        let new_space: Vec<usize> = self.grid.space_points().iter().map(|&n| n.div_ceil(space_stride)).collect();
        let nt = self.grid.time_points().div_ceil(time_stride);
        let extents: Vec<[f64; 2]> = (0..d)
            .map(|a| {
                let e = self.grid.space_extent()[a];
                let dx = self.grid.dx(a) * space_stride as f64;
                [e[0], e[0] + dx * new_space[a] as f64]
            })
            .collect();
        let t0 = self.grid.time_extent()[0];
        let grid = SpaceTimeGrid::new(
            new_space.clone(),
            nt,
            extents,
            [t0, t0 + nt as f64 * self.grid.dt() * time_stride as f64],
            self.grid.periodic().to_vec(),
        )?;
        let shape = grid.shape();
        let mut fields = Vec::new();
        for (name, arr) in self.names.iter().zip(&self.data) {
            let out = ArrayD::from_shape_fn(IxDyn(&shape), |ix| {
                let mut src: Vec<usize> = (0..d).map(|a| ix[a] * space_stride).collect();
                src.push(ix[d] * time_stride);
                arr[IxDyn(&src)]
            });
            fields.push((name.clone(), out));
        }
        Ok(TrajectoryField::new(grid, fields)?.with_provenance(self.provenance.clone()))
    }

    /// Writes the binary container: magic, JSON header, row-major little-endian f64 arrays.
    pub fn write_binary(&self, path: &Path) -> Result<(), SolveError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_binary_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_binary_to<W: Write>(&self, w: &mut W) -> Result<(), SolveError> {
        let header = Header {
            format_version: FORMAT_VERSION,
            grid: self.grid.clone(),
            fields: self.names.clone(),
            shape: self.grid.shape(),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        for arr in &self.data {
            for v in arr.iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self, SolveError> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_binary_from(&mut r)
    }

    pub fn read_binary_from<R: Read>(r: &mut R) -> Result<Self, SolveError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(SolveError::InvalidTrajectory("bad magic bytes".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut json = vec![0u8; len];
        r.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;
        if header.format_version != FORMAT_VERSION {
            return Err(SolveError::InvalidTrajectory(format!("unsupported format version {}", header.format_version)));
        }
        let n: usize = header.shape.iter().product();
        let mut fields = Vec::new();
        let mut buf = vec![0u8; n * 8];
        for name in header.fields {
            r.read_exact(&mut buf)?;
            let vals: Vec<f64> = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let arr = ArrayD::from_shape_vec(IxDyn(&header.shape), vals)
                .map_err(|e| SolveError::InvalidTrajectory(e.to_string()))?;
            fields.push((name, arr));
        }
        Ok(TrajectoryField::new(header.grid, fields)?.with_provenance(header.provenance))
    }

    /// Long-format CSV `t,x,<field>...` for 1D trajectories.
    pub fn write_csv(&self, path: &Path) -> Result<(), SolveError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_csv_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<(), SolveError> {
        if self.grid.space_dim() != 1 {
            return Err(SolveError::Unsupported("CSV export is only defined for 1D fields".into()));
        }
        write!(w, "t,x")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        let nx = self.grid.space_points()[0];
        for k in 0..self.grid.time_points() {
            let t = self.grid.time(k);
            for i in 0..nx {
                write!(w, "{t},{}", self.grid.coord(0, i))?;
                for arr in &self.data {
                    write!(w, ",{}", arr[[i, k]])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

const MAGIC: &[u8; 8] = b"CASLRTRJ";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    grid: SpaceTimeGrid,
    fields: Vec<String>,
    shape: Vec<usize>,
    provenance: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TrajectoryField {
        let g = SpaceTimeGrid::periodic_1d(4, [0.0, 1.0], 3, [0.0, 1.0]).unwrap();
        let a = ArrayD::from_shape_fn(IxDyn(&[4, 3]), |ix| (ix[0] * 10 + ix[1]) as f64);
        TrajectoryField::new(g, vec![("u".into(), a)]).unwrap()
    }

    #[test]
    fn rejects_bad_shape_and_nan() {
        let g = SpaceTimeGrid::periodic_1d(4, [0.0, 1.0], 3, [0.0, 1.0]).unwrap();
        let a = ArrayD::zeros(IxDyn(&[3, 3]));
        assert!(TrajectoryField::new(g.clone(), vec![("u".into(), a)]).is_err());
        let mut b = ArrayD::zeros(IxDyn(&[4, 3]));
        b[[1, 1]] = f64::NAN;
        assert!(TrajectoryField::new(g, vec![("u".into(), b)]).is_err());
    }

    #[test]
    fn binary_roundtrip_preserves_bits() {
        let tr = small().with_provenance(serde_json::json!({"seed": 7}));
        let mut buf = Vec::new();
        tr.write_binary_to(&mut buf).unwrap();
        assert_eq!(&buf[..8], b"CASLRTRJ");
        let back = TrajectoryField::read_binary_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn downsample_strides() {
        let tr = small();
        let d = tr.downsample(2, 2).unwrap();
        assert_eq!(d.grid().shape(), vec![2, 2]);
        assert_eq!(d.field(0)[[1, 1]], 22.0);
        assert!((d.grid().dx(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        small().write_csv_to(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x,u\n"));
        assert_eq!(s.lines().count(), 1 + 12);
    }
}
