//! Simulated data taking: random pure input states, projective qubit
//! measurements along random directions, Born-rule sampling, and the
//! line-delimited record file.
//!
//! States are Haar distributed (normalized complex Gaussian vectors) and
//! measurement directions are uniform on the sphere (normalized real
//! Gaussian 3-vectors).

use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::channels::ChoiMatrix;
use crate::error::{Error, Result};
use crate::linalg::{tensor_product, ComplexMatrix};
use crate::scalar::Scalar;

/// Generator behind every seeded stream, as written to record headers.
pub const RNG_NAME: &str = "ChaCha20";
/// Records drawn from one derived seed before moving to the next chunk.
pub const GENERATION_CHUNK: usize = 1024;
pub const RECORD_FORMAT: u32 = 1;

/// Mixes a stream index into a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Unit vector in `C^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState<T> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> PureState<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if (norm - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "state vector has norm {norm}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    /// Computational basis state `|k⟩` of `C^dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); dim];
        amplitudes[k] = Complex::new(T::one(), T::zero());
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn density(&self) -> ComplexMatrix<T> {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    /// Bloch vector `⟨ψ|σ|ψ⟩`; qubits only.
    pub fn bloch_vector(&self) -> [T; 3] {
        assert_eq!(self.dim(), 2, "Bloch vector is defined for qubits");
        let (a, b) = (self.amplitudes[0], self.amplitudes[1]);
        let ab = a.conj() * b;
        let two = T::lit(2.0);
        [two * ab.re, two * ab.im, a.norm_sqr() - b.norm_sqr()]
    }
}

/// Result of a two-outcome projective measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub fn sign(self) -> i8 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::Format(format!(
                "outcome must be +1 or -1, got {other}"
            ))),
        }
    }
}

/// Qubit measurement with effects `F± = (1 ± n·σ)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMeasurement<T> {
    direction: [T; 3],
}

impl<T: Scalar> ProjectiveMeasurement<T> {
    pub fn new(direction: [T; 3]) -> Result<Self> {
        let norm = direction.iter().map(|&x| x * x).sum::<T>().sqrt();
        if (norm - T::one()).abs() > T::tol(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "measurement direction has norm {norm}, expected 1"
            )));
        }
        Ok(Self { direction })
    }

    pub fn direction(&self) -> [T; 3] {
        self.direction
    }

    /// Unit vector `|φ⟩` with `F(outcome) = |φ⟩⟨φ|` (global phase arbitrary).
    pub fn ket(&self, outcome: Outcome) -> [Complex<T>; 2] {
        let [x, y, z] = match outcome {
            Outcome::Plus => self.direction,
            Outcome::Minus => self.direction.map(|c| -c),
        };
        let two = T::lit(2.0);
        if z >= T::zero() {
            let a = ((T::one() + z) / two).sqrt();
            let d = (two * (T::one() + z)).sqrt();
            [Complex::new(a, T::zero()), Complex::new(x / d, y / d)]
        } else {
            let b = ((T::one() - z) / two).sqrt();
            let d = (two * (T::one() - z)).sqrt();
            [Complex::new(x / d, -y / d), Complex::new(b, T::zero())]
        }
    }

    pub fn effect(&self, outcome: Outcome) -> ComplexMatrix<T> {
        let half = T::lit(0.5);
        let s = match outcome {
            Outcome::Plus => half,
            Outcome::Minus => -half,
        };
        let [x, y, z] = self.direction;
        ComplexMatrix::new(
            2,
            2,
            vec![
                Complex::new(half + s * z, T::zero()),
                Complex::new(s * x, -s * y),
                Complex::new(s * x, s * y),
                Complex::new(half - s * z, T::zero()),
            ],
        )
        .expect("2x2")
    }
}

/// One run: prepared state, measurement, observed outcome.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord<T> {
    pub state: PureState<T>,
    pub measurement: ProjectiveMeasurement<T>,
    pub outcome: Outcome,
}

impl<T: Scalar> MeasurementRecord<T> {
    pub fn effect(&self) -> ComplexMatrix<T> {
        self.measurement.effect(self.outcome)
    }
}

/// Haar-random pure state of `C^dim`.
pub fn random_pure_state<T: Scalar, R: Rng + ?Sized>(rng: &mut R, dim: usize) -> PureState<T> {
    loop {
        let v: Vec<Complex<T>> = (0..dim)
            .map(|_| Complex::new(T::sample_normal(rng), T::sample_normal(rng)))
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
        if norm > T::tol(1e-12) {
            return PureState {
                amplitudes: v.into_iter().map(|z| z / norm).collect(),
            };
        }
    }
}

/// Projective measurement along a uniformly random direction.
pub fn random_measurement<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> ProjectiveMeasurement<T> {
    loop {
        let v = [
            T::sample_normal(rng),
            T::sample_normal(rng),
            T::sample_normal(rng),
        ];
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm > T::tol(1e-12) {
            return ProjectiveMeasurement {
                direction: v.map(|x| x / norm),
            };
        }
    }
}

/// Born-rule probability `Tr[E(ρ) F] = Tr[S (F ⊗ ρᵀ)]`, clamped to `[0, 1]`.
pub fn outcome_probability<T: Scalar>(
    channel: &ChoiMatrix<T>,
    state: &PureState<T>,
    effect: &ComplexMatrix<T>,
) -> Result<T> {
    if state.dim() != channel.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for a channel with N={}",
            state.dim(),
            channel.dim_in()
        )));
    }
    if !effect.is_square() || effect.rows() != channel.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "effect of shape {}x{} for a channel with M={}",
            effect.rows(),
            effect.cols(),
            channel.dim_out()
        )));
    }
    let probe = tensor_product(effect, &state.density().transpose());
    let p = channel.matrix().trace_product(&probe)?.re;
    Ok(p.max(T::zero()).min(T::one()))
}

/// Samples the outcome of measuring `E(|ψ⟩⟨ψ|)`.
pub fn sample_outcome<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    channel: &ChoiMatrix<T>,
    state: &PureState<T>,
    measurement: &ProjectiveMeasurement<T>,
) -> Result<Outcome> {
    let p_plus = outcome_probability(channel, state, &measurement.effect(Outcome::Plus))?;
    Ok(if T::sample_unit(rng) < p_plus {
        Outcome::Plus
    } else {
        Outcome::Minus
    })
}

/// Simulates `k` runs on a qubit channel.
///
/// Record `i` comes from chunk `i / GENERATION_CHUNK`, whose generator is
/// seeded with `derive_seed(seed, chunk)`, so chunks can be produced
/// independently without changing the output.
pub fn generate_records<T: Scalar>(
    channel: &ChoiMatrix<T>,
    k: usize,
    seed: u64,
) -> Result<Vec<MeasurementRecord<T>>> {
    if channel.dim_in() != 2 || channel.dim_out() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "record generation supports qubit channels only (N={}, M={})",
            channel.dim_in(),
            channel.dim_out()
        )));
    }
    let mut records = Vec::with_capacity(k);
    let chunks = k.div_ceil(GENERATION_CHUNK);
    for chunk in 0..chunks {
        let mut rng = seeded_rng(derive_seed(seed, chunk as u64));
        let len = GENERATION_CHUNK.min(k - chunk * GENERATION_CHUNK);
        for _ in 0..len {
            let state = random_pure_state(&mut rng, 2);
            let measurement = random_measurement(&mut rng);
            let outcome = sample_outcome(&mut rng, channel, &state, &measurement)?;
            records.push(MeasurementRecord {
                state,
                measurement,
                outcome,
            });
        }
    }
    Ok(records)
}

/// First line of a record file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: u32,
    #[serde(rename = "N")]
    pub dim_in: usize,
    #[serde(rename = "M")]
    pub dim_out: usize,
    pub seed: u64,
    pub channel: String,
    #[serde(default)]
    pub rng: Option<String>,
}

impl RecordHeader {
    pub fn qubit(seed: u64, channel: impl Into<String>) -> Self {
        Self {
            format: RECORD_FORMAT,
            dim_in: 2,
            dim_out: 2,
            seed,
            channel: channel.into(),
            rng: Some(RNG_NAME.to_string()),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RecordLine {
    psi: Vec<[f64; 2]>,
    dir: [f64; 3],
    out: i64,
}

pub fn write_records<T: Scalar, W: Write>(
    mut out: W,
    header: &RecordHeader,
    records: &[MeasurementRecord<T>],
) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for r in records {
        let line = RecordLine {
            psi: r
                .state
                .amplitudes
                .iter()
                .map(|z| [z.re.as_f64(), z.im.as_f64()])
                .collect(),
            dir: r.measurement.direction.map(|x| x.as_f64()),
            out: r.outcome.sign() as i64,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a record file; unit-norm checks accept drift up to `1e-9` and
/// renormalize such entries.
pub fn read_records<T: Scalar, R: BufRead>(
    input: R,
) -> Result<(RecordHeader, Vec<MeasurementRecord<T>>)> {
    let mut lines = input.lines().enumerate();
    let header: RecordHeader = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| Error::Format(format!("bad record header: {e}")))?;
            }
            None => return Err(Error::Format("empty record file".into())),
        }
    };
    if header.format != RECORD_FORMAT {
        return Err(Error::Format(format!(
            "unsupported record format {}",
            header.format
        )));
    }
    if header.dim_in != 2 || header.dim_out != 2 {
        return Err(Error::Format(format!(
            "record files describe qubit channels (got N={}, M={})",
            header.dim_in, header.dim_out
        )));
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let raw: RecordLine = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        if raw.psi.len() != header.dim_in {
            return Err(Error::Format(format!(
                "line {lineno}: state has {} amplitudes, expected {}",
                raw.psi.len(),
                header.dim_in
            )));
        }
        let amps: Vec<Complex<T>> = raw
            .psi
            .iter()
            .map(|&[re, im]| Complex::new(T::lit(re), T::lit(im)))
            .collect();
        let state = PureState::new(normalize_near_unit(amps, lineno)?)?;
        let dir = raw.dir.map(T::lit);
        let measurement = ProjectiveMeasurement::new(normalize_dir_near_unit(dir, lineno)?)?;
        let outcome = Outcome::from_sign(raw.out)
            .map_err(|e| Error::Format(format!("line {lineno}: {e}")))?;
        records.push(MeasurementRecord {
            state,
            measurement,
            outcome,
        });
    }
    Ok((header, records))
}

fn normalize_near_unit<T: Scalar>(v: Vec<Complex<T>>, lineno: usize) -> Result<Vec<Complex<T>>> {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    let dev = (norm - T::one()).abs();
    if dev <= T::tol(1e-12) {
        Ok(v)
    } else if dev <= T::lit(1e-9) {
        Ok(v.into_iter().map(|z| z / norm).collect())
    } else {
        Err(Error::Format(format!(
            "line {lineno}: state norm {norm} is not 1"
        )))
    }
}

fn normalize_dir_near_unit<T: Scalar>(v: [T; 3], lineno: usize) -> Result<[T; 3]> {
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    let dev = (norm - T::one()).abs();
    if dev <= T::tol(1e-12) {
        Ok(v)
    } else if dev <= T::lit(1e-9) {
        Ok(v.map(|x| x / norm))
    } else {
        Err(Error::Format(format!(
            "line {lineno}: direction norm {norm} is not 1"
        )))
    }
}
