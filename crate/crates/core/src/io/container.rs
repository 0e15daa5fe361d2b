//! Binary field container with a JSON sidecar.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "RSCF" | version u32 | kind u32
//! origin 2×f64 | extent 2×f64 | nx u64 | ny u64
//! epsilon f64 | seed u64 | n_channels u32 | channel_len u64
//! payload: n_channels × channel_len f64, channel after channel, row-major
//! ```
//!
//! The sidecar `<file>.json` names the channels, carries the small metadata
//! of the artifact and the sha256 of the binary file.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::field_synth::{AnisotropyField, FieldRealization};
use crate::grid::{Disk, GridSpec2D};
use crate::recovery::{ModeField, RecoveredAnisotropy, RecoveryDiagnostics};
use crate::sradon::{Centers, RadonGrid, SpectralSlices};

use super::sha256_hex;

pub const MAGIC: [u8; 4] = *b"RSCF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 * 4 + 8 * 2 + 8 + 8 + 4 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Field,
    Anisotropy,
    Radon,
    Slices,
    Recovered,
    Modes,
}

impl Kind {
    fn code(self) -> u32 {
        match self {
            Kind::Field => 1,
            Kind::Anisotropy => 2,
            Kind::Radon => 3,
            Kind::Slices => 4,
            Kind::Recovered => 5,
            Kind::Modes => 6,
        }
    }

    fn from_code(c: u32) -> Result<Self> {
        Ok(match c {
            1 => Kind::Field,
            2 => Kind::Anisotropy,
            3 => Kind::Radon,
            4 => Kind::Slices,
            5 => Kind::Recovered,
            6 => Kind::Modes,
            _ => return Err(Error::Format(format!("unknown container kind {c}"))),
        })
    }
}

/// Decoded container: header fields, named channels and sidecar metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Container {
    pub kind: Kind,
    pub grid: GridSpec2D,
    pub epsilon: f64,
    pub seed: u64,
    pub names: Vec<String>,
    pub channels: Vec<Vec<f64>>,
    pub metadata: Value,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    kind: Kind,
    channels: Vec<String>,
    sha256: String,
    metadata: Value,
    provenance: Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let s = self.buf.get(self.at..end).ok_or_else(|| Error::Format("truncated container".into()))?;
        self.at = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

impl Container {
    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.channels[i].as_slice())
            .ok_or_else(|| Error::Format(format!("container has no channel '{name}'")))
    }

    fn expect(&self, kind: Kind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format(format!("expected a {kind:?} container, found {:?}", self.kind)));
        }
        Ok(())
    }

    fn meta<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        let v = self.metadata.get(key).cloned().ok_or_else(|| Error::Format(format!("sidecar metadata lacks '{key}'")))?;
        Ok(serde_json::from_value(v)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let len = self.channels.first().map_or(0, Vec::len);
        if self.channels.iter().any(|c| c.len() != len) || self.names.len() != self.channels.len() {
            return Err(Error::Format("channels must be named and of equal length".into()));
        }
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * len * self.channels.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.kind.code().to_le_bytes());
        let g = &self.grid;
        for v in [g.origin[0], g.origin[1], g.extent[0], g.extent[1]] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(g.nx as u64).to_le_bytes());
        out.extend_from_slice(&(g.ny as u64).to_le_bytes());
        out.extend_from_slice(&self.epsilon.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.channels.len() as u32).to_le_bytes());
        out.extend_from_slice(&(len as u64).to_le_bytes());
        for c in &self.channels {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    /// Decode the binary part; names and metadata are left empty.
    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, at: 0 };
        if r.take::<4>()? != MAGIC {
            return Err(Error::Format("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported container version {version}")));
        }
        let kind = Kind::from_code(r.u32()?)?;
        let (o0, o1, e0, e1) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        let (nx, ny) = (r.u64()? as usize, r.u64()? as usize);
        let grid = GridSpec2D { origin: [o0, o1], extent: [e0, e1], nx, ny };
        let epsilon = r.f64()?;
        let seed = r.u64()?;
        let n_ch = r.u32()? as usize;
        let len = r.u64()? as usize;
        let need = n_ch.checked_mul(len).and_then(|v| v.checked_mul(8)).ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if buf.len() != HEADER_LEN + need {
            return Err(Error::Format(format!("payload is {} bytes, header promises {need}", buf.len() - HEADER_LEN.min(buf.len()))));
        }
        let channels = (0..n_ch).map(|_| (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        Ok(Container { kind, grid, epsilon, seed, names: Vec::new(), channels, metadata: Value::Null })
    }

    /// Write the binary file and its sidecar; returns the sha256 of the binary.
    pub fn write(&self, path: &Path, provenance: Value) -> Result<String> {
        let bytes = self.to_bytes()?;
        let sha = sha256_hex(&bytes);
        fs::write(path, &bytes)?;
        let side = Sidecar {
            format: "RSCF".into(),
            version: VERSION,
            kind: self.kind,
            channels: self.names.clone(),
            sha256: sha.clone(),
            metadata: self.metadata.clone(),
            provenance,
        };
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&side)?)?;
        Ok(sha)
    }

    /// Read a container and its sidecar, checking the recorded hash.
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
        let sha = sha256_hex(&bytes);
        if sha != side.sha256 {
            return Err(Error::Format(format!("{} does not match the hash in its sidecar", path.display())));
        }
        let mut c = Self::from_bytes(&bytes)?;
        if c.kind != side.kind || c.channels.len() != side.channels.len() {
            return Err(Error::Format("sidecar disagrees with the container header".into()));
        }
        c.names = side.channels;
        c.metadata = side.metadata;
        Ok(c)
    }
}

/// Types stored in the binary container.
pub trait Artifact: Sized {
    fn to_container(&self) -> Container;
    fn from_container(c: &Container) -> Result<Self>;

    fn save(&self, path: &Path, provenance: Value) -> Result<String> {
        self.to_container().write(path, provenance)
    }

    fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::read(path)?)
    }
}

fn split(v: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

fn join(re: &[f64], im: &[f64]) -> Vec<Complex64> {
    re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect()
}

fn flags(v: &[bool]) -> Vec<f64> {
    v.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect()
}

fn unflags(v: &[f64]) -> Vec<bool> {
    v.iter().map(|x| *x != 0.0).collect()
}

fn names(n: &[&str]) -> Vec<String> {
    n.iter().map(|s| s.to_string()).collect()
}

impl Artifact for FieldRealization {
    fn to_container(&self) -> Container {
        Container {
            kind: Kind::Field,
            grid: self.grid,
            epsilon: self.epsilon,
            seed: self.seed,
            names: names(&["lambda"]),
            channels: vec![self.values.clone()],
            metadata: json!({ "disk": self.disk, "strength_ref": self.strength_ref }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Field)?;
        Ok(FieldRealization {
            grid: c.grid,
            disk: c.meta("disk")?,
            values: c.channel("lambda")?.to_vec(),
            seed: c.seed,
            epsilon: c.epsilon,
            strength_ref: c.meta("strength_ref")?,
        })
    }
}

impl Artifact for AnisotropyField {
    fn to_container(&self) -> Container {
        Container {
            kind: Kind::Anisotropy,
            grid: self.grid,
            epsilon: 0.0,
            seed: 0,
            names: names(&["a1", "a2", "a3", "support"]),
            channels: vec![self.a1.clone(), self.a2.clone(), self.a3.clone(), flags(&self.support_mask)],
            metadata: json!({ "disk": self.disk, "eig_bound": self.eig_bound }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Anisotropy)?;
        Ok(AnisotropyField {
            grid: c.grid,
            disk: c.meta::<Disk>("disk")?,
            a1: c.channel("a1")?.to_vec(),
            a2: c.channel("a2")?.to_vec(),
            a3: c.channel("a3")?.to_vec(),
            support_mask: unflags(c.channel("support")?),
            eig_bound: c.meta("eig_bound")?,
        })
    }
}

impl Artifact for RadonGrid {
    fn to_container(&self) -> Container {
        // Listed centers have no grid; the header then records `nx = #centers, ny = 1`.
        let grid = match &self.centers {
            Centers::Grid(g) => *g,
            Centers::List(l) => GridSpec2D { origin: [0.0, 0.0], extent: [0.0, 0.0], nx: l.len(), ny: 1 },
        };
        Container {
            kind: Kind::Radon,
            grid,
            epsilon: 0.0,
            seed: 0,
            names: names(&["values"]),
            channels: vec![self.values.clone()],
            metadata: json!({ "centers": self.centers, "radii": self.radii, "layout": "center-major, radius fastest" }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Radon)?;
        Ok(RadonGrid { centers: c.meta("centers")?, radii: c.meta("radii")?, values: c.channel("values")?.to_vec() })
    }
}

impl Artifact for SpectralSlices {
    fn to_container(&self) -> Container {
        let (pr, pi) = split(&self.slice_par);
        let (qr, qi) = split(&self.slice_perp);
        Container {
            kind: Kind::Slices,
            grid: self.grid,
            epsilon: 0.0,
            seed: 0,
            names: names(&["par_re", "par_im", "perp_re", "perp_im", "valid", "cond"]),
            channels: vec![pr, pi, qr, qi, flags(&self.valid), self.cond.clone()],
            metadata: json!({ "r_window": self.r_window, "axis": "xi on the FFT lattice of the grid" }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Slices)?;
        Ok(SpectralSlices {
            grid: c.grid,
            slice_par: join(c.channel("par_re")?, c.channel("par_im")?),
            slice_perp: join(c.channel("perp_re")?, c.channel("perp_im")?),
            valid: unflags(c.channel("valid")?),
            cond: c.channel("cond")?.to_vec(),
            r_window: c.meta("r_window")?,
        })
    }
}

impl Artifact for RecoveredAnisotropy {
    fn to_container(&self) -> Container {
        let mut names = vec!["trace".to_string()];
        let mut channels = vec![self.trace.clone()];
        for (n, v) in [("a1", &self.a1), ("a2", &self.a2), ("a3", &self.a3)] {
            if let Some(v) = v {
                names.push(n.into());
                channels.push(v.clone());
            }
        }
        Container {
            kind: Kind::Recovered,
            grid: self.grid,
            epsilon: 0.0,
            seed: 0,
            names,
            channels,
            metadata: json!({ "diagnostics": self.diagnostics }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Recovered)?;
        let opt = |n: &str| c.channel(n).ok().map(<[f64]>::to_vec);
        Ok(RecoveredAnisotropy {
            grid: c.grid,
            trace: c.channel("trace")?.to_vec(),
            a1: opt("a1"),
            a2: opt("a2"),
            a3: opt("a3"),
            diagnostics: c.meta::<RecoveryDiagnostics>("diagnostics")?,
        })
    }
}

impl Artifact for ModeField {
    fn to_container(&self) -> Container {
        Container {
            kind: Kind::Modes,
            grid: self.grid,
            epsilon: 0.0,
            seed: 0,
            names: names(&["c0", "c1", "s1"]),
            channels: self.modes.to_vec(),
            metadata: json!({ "disk": self.disk, "model": "b = c0 + c1 cos 2θ + s1 sin 2θ, bilinear" }),
        }
    }

    fn from_container(c: &Container) -> Result<Self> {
        c.expect(Kind::Modes)?;
        Ok(ModeField {
            grid: c.grid,
            disk: c.meta("disk")?,
            modes: [c.channel("c0")?.to_vec(), c.channel("c1")?.to_vec(), c.channel("s1")?.to_vec()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_synth::Preset;

    fn grid() -> GridSpec2D {
        GridSpec2D::square([0.0, 0.0], 4.0, 16).unwrap()
    }

    #[test]
    fn header_is_little_endian_and_sized() {
        let c = FieldRealization {
            grid: grid(),
            disk: Disk::unit(),
            values: (0..256).map(f64::from).collect(),
            seed: 7,
            epsilon: 0.5,
            strength_ref: "s".into(),
        }
        .to_container();
        let b = c.to_bytes().unwrap();
        assert_eq!(&b[..4], b"RSCF");
        assert_eq!(b.len(), HEADER_LEN + 256 * 8);
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), VERSION);
        let last = f64::from_le_bytes(b[b.len() - 8..].try_into().unwrap());
        assert_eq!(last, 255.0);
    }

    #[test]
    fn truncated_and_corrupt_input_rejected() {
        let a = AnisotropyField::preset(grid(), Disk::unit(), Preset::Default).unwrap();
        let b = a.to_container().to_bytes().unwrap();
        assert!(Container::from_bytes(&b[..b.len() - 3]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad).is_err());
    }

    #[test]
    fn files_round_trip_and_hash_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let a = AnisotropyField::preset(grid(), Disk::unit(), Preset::Default).unwrap();
        let p = dir.path().join("a.rscf");
        let sha = a.save(&p, json!({ "stage": "test" })).unwrap();
        assert_eq!(sha.len(), 64);
        assert_eq!(AnisotropyField::load(&p).unwrap(), a);
        let mut bytes = fs::read(&p).unwrap();
        let n = bytes.len();
        bytes[n - 1] ^= 1;
        fs::write(&p, bytes).unwrap();
        assert!(matches!(AnisotropyField::load(&p), Err(Error::Format(_))));
    }

    #[test]
    fn slices_and_recovery_round_trip() {
        let n = grid().len();
        let s = SpectralSlices {
            grid: grid(),
            slice_par: (0..n).map(|i| Complex64::new(i as f64, -1.0)).collect(),
            slice_perp: vec![Complex64::new(0.5, 0.25); n],
            valid: (0..n).map(|i| i % 3 != 0).collect(),
            cond: (0..n).map(|i| if i == 0 { f64::INFINITY } else { i as f64 }).collect(),
            r_window: (0.5, 2.0),
        };
        assert_eq!(SpectralSlices::from_container(&s.to_container()).unwrap(), s);
        let r = RecoveredAnisotropy {
            grid: grid(),
            trace: vec![1.0; n],
            a1: None,
            a2: Some(vec![2.0; n]),
            a3: None,
            diagnostics: RecoveryDiagnostics { masked_fraction: 0.1, ..Default::default() },
        };
        let back = RecoveredAnisotropy::from_container(&r.to_container()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn listed_centers_round_trip() {
        let r = RadonGrid { centers: Centers::List(vec![[2.0, 0.0], [0.0, -2.0]]), radii: vec![1.0, 2.0, 3.0], values: (0..6).map(f64::from).collect() };
        let c = r.to_container();
        assert_eq!(c.grid.nx, 2);
        assert_eq!(RadonGrid::from_container(&c).unwrap(), r);
    }
}
