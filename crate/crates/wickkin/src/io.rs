//! File formats: CSV spectra and trajectories, JSON tables, Wick polynomials
//! and amplitude models, binary field snapshots and run manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! reader here recovers the written values bit for bit.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use wickkin_core::hierarchy::Interaction;
use wickkin_core::indexing::{Key, LabeledSeq, Mask, Var};
use wickkin_core::wick::CumulantMonomial;
use wickkin_core::{Amplitude, AmplitudeModel, CumulantTable, MomentOracle, Provenance, WickPoly};

use crate::dnls::{Ensemble, Family, Spectrum};
use crate::error::{Error, Result};
use crate::kinetic::Trajectory;
use crate::lattice::Lattice;

/// Version stamped into every JSON document and accepted by the readers.
pub const SCHEMA_VERSION: u32 = 1;

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn from_c2(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

fn check_schema(found: u32) -> Result<()> {
    if found != SCHEMA_VERSION {
        return Err(Error::Config(format!("schema version {found} is not supported (expected {SCHEMA_VERSION})")));
    }
    Ok(())
}

fn k_header(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("k{i}")).collect()
}

fn k_fields(lat: &Lattice, idx: usize) -> Vec<String> {
    let k = lat.momentum(idx);
    (0..lat.d).map(|a| k[a].to_string()).collect()
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("{what}: cannot parse {s:?} as a number")))
}

/// Recover the flat index of a momentum tuple on a side-`l` grid.
fn k_index(lat: &Lattice, ks: &[f64]) -> Result<usize> {
    let mut c = [0usize; 3];
    for (a, &k) in ks.iter().enumerate() {
        let x = k * lat.l as f64;
        let r = x.round();
        if (x - r).abs() > 1e-9 || r < 0.0 || r >= lat.l as f64 {
            return Err(Error::Format(format!("momentum component {k} is not on the 1/{} grid", lat.l)));
        }
        c[a] = r as usize;
    }
    Ok(lat.index(c))
}

fn lattice_from_rows(d: usize, rows: usize) -> Result<Lattice> {
    let l = (rows as f64).powf(1.0 / d as f64).round() as usize;
    if l.pow(d as u32) != rows {
        return Err(Error::Format(format!("{rows} rows do not form a {d}-dimensional cubic grid")));
    }
    Lattice::new(d, l).map_err(|e| Error::Format(e.to_string()))
}

/// Columns `k1..kd,value,stderr`; `stderr` is empty when unknown.
pub fn write_spectrum_csv(path: &Path, s: &Spectrum) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = k_header(s.lattice.d);
    head.extend(["value".to_string(), "stderr".to_string()]);
    w.write_record(&head)?;
    for (i, v) in s.values.iter().enumerate() {
        let mut rec = k_fields(&s.lattice, i);
        rec.push(v.to_string());
        rec.push(s.stderr.as_ref().map(|e| e[i].to_string()).unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    let mut r = csv::Reader::from_path(path)?;
    let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let d = head.iter().take_while(|h| h.starts_with('k')).count();
    if d == 0 || head.get(d).map(String::as_str) != Some("value") {
        return Err(Error::Format(format!("{}: expected header k1..kd,value[,stderr]", path.display())));
    }
    let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    let lat = lattice_from_rows(d, rows.len())?;
    let mut values = vec![f64::NAN; lat.volume()];
    let mut errs = vec![f64::NAN; lat.volume()];
    let mut any_err = false;
    for rec in &rows {
        let ks: Vec<f64> = (0..d).map(|a| parse_f64(&rec[a], "k")).collect::<Result<_>>()?;
        let i = k_index(&lat, &ks)?;
        values[i] = parse_f64(&rec[d], "value")?;
        if let Some(e) = rec.get(d + 1).filter(|s| !s.trim().is_empty()) {
            errs[i] = parse_f64(e, "stderr")?;
            any_err = true;
        }
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(Error::Format(format!("mode {i} is missing from {}", path.display())));
    }
    let mut s = Spectrum::new(lat, values)?;
    if any_err {
        s.stderr = Some(errs);
    }
    Ok(s)
}

/// Long format: one row `tau,k1..kd,W` per time and mode.
pub fn write_trajectory_csv(path: &Path, lat: &Lattice, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["tau".to_string()];
    head.extend(k_header(lat.d));
    head.push("W".into());
    w.write_record(&head)?;
    for (tau, spec) in traj.taus.iter().zip(&traj.spectra) {
        for (i, v) in spec.iter().enumerate() {
            let mut rec = vec![tau.to_string()];
            rec.extend(k_fields(lat, i));
            rec.push(v.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Times and spectra of a trajectory file, in file order.
pub fn read_trajectory_csv(path: &Path) -> Result<(Lattice, Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let d = r.headers()?.len().saturating_sub(2);
    if d == 0 {
        return Err(Error::Format(format!("{}: expected header tau,k1..kd,W", path.display())));
    }
    let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
    let mut taus: Vec<f64> = Vec::new();
    let mut blocks: Vec<Vec<&csv::StringRecord>> = Vec::new();
    for rec in &rows {
        let tau = parse_f64(&rec[0], "tau")?;
        if taus.last() != Some(&tau) {
            taus.push(tau);
            blocks.push(Vec::new());
        }
        blocks.last_mut().unwrap().push(rec);
    }
    let per = blocks.first().map_or(0, Vec::len);
    let lat = lattice_from_rows(d, per)?;
    let mut spectra = Vec::with_capacity(blocks.len());
    for b in blocks {
        if b.len() != per {
            return Err(Error::Format("trajectory blocks have unequal sizes".into()));
        }
        let mut w = vec![0.0; per];
        for rec in b {
            let ks: Vec<f64> = (0..d).map(|a| parse_f64(&rec[1 + a], "k")).collect::<Result<_>>()?;
            w[k_index(&lat, &ks)?] = parse_f64(&rec[1 + d], "W")?;
        }
        spectra.push(w);
    }
    Ok((lat, taus, spectra))
}

/// JSON summary of a trajectory: the conserved quantities and entropy trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub schema: u32,
    pub lattice: Lattice,
    pub taus: Vec<f64>,
    pub number: Vec<f64>,
    pub energy: Vec<f64>,
    pub entropy: Vec<f64>,
    pub max_number_drift: f64,
    pub max_energy_drift: f64,
    pub entropy_nondecreasing: bool,
}

impl TrajectorySummary {
    pub fn new(lattice: Lattice, t: &Trajectory) -> Self {
        let drift = |v: &[f64]| {
            let v0 = v.first().copied().unwrap_or(0.0);
            v.iter().map(|x| ((x - v0) / v0.abs().max(f64::MIN_POSITIVE)).abs()).fold(0.0, f64::max)
        };
        let tol = 1e-12 * t.entropy.iter().map(|x| x.abs()).fold(1.0, f64::max);
        TrajectorySummary {
            schema: SCHEMA_VERSION,
            lattice,
            taus: t.taus.clone(),
            number: t.number.clone(),
            energy: t.energy.clone(),
            entropy: t.entropy.clone(),
            max_number_drift: drift(&t.number),
            max_energy_drift: drift(&t.energy),
            entropy_nondecreasing: t.entropy.windows(2).all(|w| w[1] >= w[0] - tol),
        }
    }
}

/// What the entries of a [`TableDoc`] hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    Cumulant,
    Moment,
    /// Time derivatives of cumulants.
    CumulantRate,
}

/// `{schema, kind, provenance, entries: {"i,j,…": [re, im]}}` where the key
/// lists variable ids in ascending order, repeats included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableDoc {
    pub schema: u32,
    pub kind: TableKind,
    #[serde(default)]
    pub provenance: Option<String>,
    pub entries: BTreeMap<String, [f64; 2]>,
}

pub fn key_string(vars: &[Var]) -> String {
    vars.iter().map(|v| v.0.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_key(s: &str) -> Result<Key> {
    if s.trim().is_empty() {
        return Ok(Key::empty());
    }
    let vars = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map(Var))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Format(format!("bad table key {s:?}")))?;
    Ok(Key::new(vars))
}

fn provenance_name(p: Provenance) -> &'static str {
    match p {
        Provenance::Analytic => "analytic",
        Provenance::RecursiveFromMoments => "recursive-from-moments",
        Provenance::Empirical => "empirical",
    }
}

fn parse_provenance(s: Option<&str>) -> Result<Provenance> {
    match s {
        None | Some("analytic") => Ok(Provenance::Analytic),
        Some("recursive-from-moments") => Ok(Provenance::RecursiveFromMoments),
        Some("empirical") => Ok(Provenance::Empirical),
        Some(o) => Err(Error::Config(format!("unknown provenance {o:?}"))),
    }
}

impl TableDoc {
    pub fn from_table(kind: TableKind, t: &CumulantTable) -> Self {
        TableDoc {
            schema: SCHEMA_VERSION,
            kind,
            provenance: Some(provenance_name(t.provenance).into()),
            entries: t.iter().map(|(k, v)| (key_string(k.vars()), c2(*v))).collect(),
        }
    }

    pub fn from_moments(m: &MomentTable) -> Self {
        TableDoc {
            schema: SCHEMA_VERSION,
            kind: TableKind::Moment,
            provenance: None,
            entries: m.entries.iter().map(|(k, v)| (key_string(k.vars()), c2(*v))).collect(),
        }
    }

    fn pairs(&self) -> Result<Vec<(Key, Complex64)>> {
        check_schema(self.schema)?;
        self.entries.iter().map(|(k, v)| Ok((parse_key(k)?, from_c2(*v)))).collect()
    }

    /// Entries as a cumulant table, whatever the declared kind.
    pub fn to_table(&self) -> Result<CumulantTable> {
        let mut t = CumulantTable::new(parse_provenance(self.provenance.as_deref())?);
        for (k, v) in self.pairs()? {
            t.insert(k.vars(), v);
        }
        Ok(t)
    }

    pub fn to_moments(&self) -> Result<MomentTable> {
        let mut m = MomentTable::default();
        for (k, v) in self.pairs()? {
            if !k.is_empty() {
                m.entries.insert(k, v);
            }
        }
        Ok(m)
    }
}

pub fn write_table(path: &Path, doc: &TableDoc) -> Result<()> {
    write_json(path, doc)
}

pub fn read_table(path: &Path) -> Result<TableDoc> {
    read_json(path)
}

/// Tabulated moments as an oracle; `E[y^∅] = 1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MomentTable {
    pub entries: BTreeMap<Key, Complex64>,
}

impl MomentTable {
    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.entries.keys().flat_map(|k| k.vars().iter().copied()).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl MomentOracle for MomentTable {
    fn max_order(&self) -> usize {
        self.entries.keys().map(Key::len).max().unwrap_or(0)
    }

    fn moment(&self, vars: &[Var]) -> wickkin_core::Result<Complex64> {
        if vars.is_empty() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.entries
            .get(&Key::from_slice(vars))
            .copied()
            .ok_or_else(|| wickkin_core::Error::InvalidModel(format!("no moment stored for key {vars:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundElem {
    pub label: u32,
    pub var: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WickTerm {
    pub subset: Vec<u32>,
    pub coeff: [f64; 2],
}

/// One product `sign · Π κ[y_A] · y^U` of the cumulant expansion, by labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    pub monomial: Vec<u32>,
    pub cumulants: Vec<Vec<u32>>,
    pub sign: i32,
    pub value: [f64; 2],
}

/// `{schema, ground: [{label, var}], terms: [{subset, coeff}], expansion?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WickDoc {
    pub schema: u32,
    pub ground: Vec<GroundElem>,
    pub terms: Vec<WickTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<Vec<ExpansionTerm>>,
}

impl WickDoc {
    pub fn new(w: &WickPoly, expansion: Option<&[CumulantMonomial]>) -> Self {
        let g = w.ground();
        WickDoc {
            schema: SCHEMA_VERSION,
            ground: g.elems().iter().map(|&(label, v)| GroundElem { label, var: v.0 }).collect(),
            terms: w
                .terms()
                .map(|(m, c)| WickTerm {
                    subset: g.labels_of(m),
                    coeff: c2(c),
                })
                .collect(),
            expansion: expansion.map(|ex| {
                ex.iter()
                    .map(|t| ExpansionTerm {
                        monomial: g.labels_of(t.monomial),
                        cumulants: t.blocks.iter().map(|&b| g.labels_of(b)).collect(),
                        sign: t.sign,
                        value: c2(t.value),
                    })
                    .collect()
            }),
        }
    }

    pub fn to_poly(&self) -> Result<WickPoly> {
        check_schema(self.schema)?;
        let ground = LabeledSeq::new(self.ground.iter().map(|e| (e.label, Var(e.var))).collect())?;
        let mut terms: BTreeMap<Mask, Complex64> = BTreeMap::new();
        for t in &self.terms {
            let m = ground
                .mask_of_labels(&t.subset)
                .ok_or_else(|| Error::Format(format!("subset {:?} is not within the ground labels", t.subset)))?;
            terms.insert(m, from_c2(t.coeff));
        }
        Ok(WickPoly::from_terms(ground, terms))
    }
}

pub fn write_wick(path: &Path, doc: &WickDoc) -> Result<()> {
    write_json(path, doc)
}

pub fn read_wick(path: &Path) -> Result<WickDoc> {
    read_json(path)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentTerm {
    pub coeff: [f64; 2],
    pub monomial: Vec<u32>,
}

/// Amplitude descriptors of a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AmplitudeDoc {
    Constant { value: [f64; 2] },
    /// `coeff · e^{iΩt}`
    Phase { coeff: [f64; 2], omega: f64 },
    /// `[t, re, im]` knots, linearly interpolated.
    Table { knots: Vec<[f64; 3]> },
    StateMoments { terms: Vec<MomentTerm> },
}

impl AmplitudeDoc {
    fn from_amplitude(a: &Amplitude) -> Self {
        match a {
            Amplitude::Constant(c) => AmplitudeDoc::Constant { value: c2(*c) },
            Amplitude::Phase { coeff, omega } => AmplitudeDoc::Phase {
                coeff: c2(*coeff),
                omega: *omega,
            },
            Amplitude::Table(k) => AmplitudeDoc::Table {
                knots: k.iter().map(|(t, v)| [*t, v.re, v.im]).collect(),
            },
            Amplitude::StateMoments(terms) => AmplitudeDoc::StateMoments {
                terms: terms
                    .iter()
                    .map(|(c, m)| MomentTerm {
                        coeff: c2(*c),
                        monomial: m.iter().map(|v| v.0).collect(),
                    })
                    .collect(),
            },
        }
    }

    fn to_amplitude(&self) -> Amplitude {
        match self {
            AmplitudeDoc::Constant { value } => Amplitude::Constant(from_c2(*value)),
            AmplitudeDoc::Phase { coeff, omega } => Amplitude::Phase {
                coeff: from_c2(*coeff),
                omega: *omega,
            },
            AmplitudeDoc::Table { knots } => {
                Amplitude::Table(knots.iter().map(|k| (k[0], Complex64::new(k[1], k[2]))).collect())
            }
            AmplitudeDoc::StateMoments { terms } => Amplitude::StateMoments(
                terms
                    .iter()
                    .map(|t| (from_c2(t.coeff), t.monomial.iter().map(|&i| Var(i)).collect()))
                    .collect(),
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionDoc {
    pub target: u32,
    pub seq: Vec<u32>,
    pub amplitude: AmplitudeDoc,
}

/// `{schema, vars, interactions: [{target, seq, amplitude}], initial?, t?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub schema: u32,
    pub vars: Vec<u32>,
    pub interactions: Vec<InteractionDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<TableDoc>,
    #[serde(default)]
    pub t: f64,
}

impl ModelDoc {
    pub fn new(m: &AmplitudeModel) -> Self {
        ModelDoc {
            schema: SCHEMA_VERSION,
            vars: m.vars().iter().map(|v| v.0).collect(),
            interactions: m
                .iter()
                .map(|(j, Interaction { seq, amplitude })| InteractionDoc {
                    target: j.0,
                    seq: seq.vars().iter().map(|v| v.0).collect(),
                    amplitude: AmplitudeDoc::from_amplitude(amplitude),
                })
                .collect(),
            initial: None,
            t: 0.0,
        }
    }

    pub fn to_model(&self) -> Result<AmplitudeModel> {
        check_schema(self.schema)?;
        let mut m = AmplitudeModel::new(self.vars.iter().map(|&i| Var(i)).collect());
        for i in &self.interactions {
            let seq: Vec<Var> = i.seq.iter().map(|&v| Var(v)).collect();
            m.add(Var(i.target), &seq, i.amplitude.to_amplitude())?;
        }
        Ok(m)
    }
}

pub fn write_model(path: &Path, doc: &ModelDoc) -> Result<()> {
    write_json(path, doc)
}

pub fn read_model(path: &Path) -> Result<ModelDoc> {
    read_json(path)
}

/// Magic bytes opening every snapshot file.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"WKSNAP01";

/// Bytes before the field data.
pub const SNAPSHOT_HEADER_LEN: usize = 56;

/// Storage width of snapshot entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    /// Two `f32` per entry.
    Complex64,
    /// Two `f64` per entry.
    Complex128,
}

impl Precision {
    fn entry_bytes(self) -> u32 {
        match self {
            Precision::Complex64 => 8,
            Precision::Complex128 => 16,
        }
    }
}

/// Header of a field snapshot.
///
/// Layout, all little-endian: magic `WKSNAP01` (8 bytes), `d: u32`,
/// `L: u32`, entry width in bytes `u32` (8 or 16), reserved `u32` (0),
/// `t: f64`, `λ: f64`, `seed: u64`, realization `index: u64`, then `L^d`
/// entries `(re, im)` in row-major site order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub lattice: Lattice,
    pub precision: Precision,
    pub t: f64,
    pub lambda: f64,
    pub seed: u64,
    pub index: u64,
}

pub fn write_snapshot(path: &Path, h: &SnapshotHeader, psi: &[Complex64]) -> Result<()> {
    if psi.len() != h.lattice.volume() {
        return Err(Error::Mismatch(format!("field has {} sites, lattice {}", psi.len(), h.lattice.volume())));
    }
    let mut buf = Vec::with_capacity(SNAPSHOT_HEADER_LEN + psi.len() * h.precision.entry_bytes() as usize);
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&(h.lattice.d as u32).to_le_bytes());
    buf.extend_from_slice(&(h.lattice.l as u32).to_le_bytes());
    buf.extend_from_slice(&h.precision.entry_bytes().to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&h.t.to_le_bytes());
    buf.extend_from_slice(&h.lambda.to_le_bytes());
    buf.extend_from_slice(&h.seed.to_le_bytes());
    buf.extend_from_slice(&h.index.to_le_bytes());
    for z in psi {
        match h.precision {
            Precision::Complex64 => {
                buf.extend_from_slice(&(z.re as f32).to_le_bytes());
                buf.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
            Precision::Complex128 => {
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

fn take<const N: usize>(b: &[u8], at: usize) -> [u8; N] {
    b[at..at + N].try_into().unwrap()
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<Complex64>)> {
    let mut b = Vec::new();
    File::open(path)?.read_to_end(&mut b)?;
    if b.len() < SNAPSHOT_HEADER_LEN || &b[..8] != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!("{} is not a field snapshot", path.display())));
    }
    let d = u32::from_le_bytes(take(&b, 8)) as usize;
    let l = u32::from_le_bytes(take(&b, 12)) as usize;
    let precision = match u32::from_le_bytes(take(&b, 16)) {
        8 => Precision::Complex64,
        16 => Precision::Complex128,
        w => return Err(Error::Format(format!("unsupported entry width {w}"))),
    };
    let lattice = Lattice::new(d, l).map_err(|e| Error::Format(e.to_string()))?;
    let h = SnapshotHeader {
        lattice,
        precision,
        t: f64::from_le_bytes(take(&b, 24)),
        lambda: f64::from_le_bytes(take(&b, 32)),
        seed: u64::from_le_bytes(take(&b, 40)),
        index: u64::from_le_bytes(take(&b, 48)),
    };
    let w = precision.entry_bytes() as usize;
    let body = &b[SNAPSHOT_HEADER_LEN..];
    if body.len() != lattice.volume() * w {
        return Err(Error::Format(format!("{}: expected {} data bytes, found {}", path.display(), lattice.volume() * w, body.len())));
    }
    let psi = body
        .chunks_exact(w)
        .map(|c| match precision {
            Precision::Complex64 => Complex64::new(f32::from_le_bytes(take(c, 0)) as f64, f32::from_le_bytes(take(c, 4)) as f64),
            Precision::Complex128 => Complex64::new(f64::from_le_bytes(take(c, 0)), f64::from_le_bytes(take(c, 8))),
        })
        .collect();
    Ok((h, psi))
}

/// `manifest.json` of an ensemble directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub schema: u32,
    pub lattice: Lattice,
    pub lambda: f64,
    pub seed: u64,
    pub t: f64,
    pub realizations: usize,
    pub family: Family,
    pub precision: Precision,
    pub files: Vec<String>,
    /// `[t, R_t]` pairs.
    pub history: Vec<[f64; 2]>,
}

/// One snapshot per realization plus `manifest.json`.
pub fn write_ensemble(dir: &Path, ens: &Ensemble, lambda: f64, family: Family, precision: Precision) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(ens.len());
    for (i, psi) in ens.fields.iter().enumerate() {
        let name = format!("realization_{i:06}.bin");
        let h = SnapshotHeader {
            lattice: ens.lattice,
            precision,
            t: ens.t,
            lambda,
            seed: ens.seed,
            index: i as u64,
        };
        write_snapshot(&dir.join(&name), &h, psi)?;
        files.push(name);
    }
    let m = EnsembleManifest {
        schema: SCHEMA_VERSION,
        lattice: ens.lattice,
        lambda,
        seed: ens.seed,
        t: ens.t,
        realizations: ens.len(),
        family,
        precision,
        files,
        history: ens.history.iter().map(|&(t, r)| [t, r]).collect(),
    };
    write_json(&dir.join("manifest.json"), &m)
}

pub fn read_ensemble(dir: &Path) -> Result<(EnsembleManifest, Ensemble)> {
    let m: EnsembleManifest = read_json(&dir.join("manifest.json"))?;
    check_schema(m.schema)?;
    let mut fields = Vec::with_capacity(m.files.len());
    for f in &m.files {
        let (h, psi) = read_snapshot(&dir.join(f))?;
        if h.lattice != m.lattice || h.seed != m.seed {
            return Err(Error::Format(format!("{f} disagrees with the ensemble manifest")));
        }
        fields.push(psi);
    }
    let ens = Ensemble {
        lattice: m.lattice,
        seed: m.seed,
        t: m.t,
        fields,
        history: m.history.iter().map(|p| (p[0], p[1])).collect(),
    };
    Ok((m, ens))
}

/// `manifest.json` of a tool run: the echoed configuration, the tool version
/// and wall-clock timings. Results live in `outputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub config: Value,
    pub outputs: Vec<String>,
    pub timings_ms: BTreeMap<String, f64>,
}

pub fn write_run_manifest(dir: &Path, m: &RunManifest) -> Result<PathBuf> {
    let p = dir.join("manifest.json");
    write_json(&p, m)?;
    Ok(p)
}
