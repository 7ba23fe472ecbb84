//! Plant models: LTV systems `ẋ = A(t)x + b(t)`, `y = C(t)ᵀx`, their
//! state-affine origin, the built-in scenario library, and the classical
//! objects attached to them (transition matrix, observability Grammian, a
//! uniform-stability diagnostic).

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::numerics::{dot, rk4_step, spectral_norm, Matrix, OdeGrid};

/// Relative slack allowed when a time lands just past the end of a table.
const DOMAIN_SLACK: f64 = 1e-9;

/// A single-output linear time-varying system.
///
/// Implementations must be cheap to evaluate and return finite values on
/// their domain.
pub trait LtvSystem: Send + Sync {
    fn dim(&self) -> usize;
    fn a(&self, t: f64) -> Matrix;
    fn b(&self, t: f64) -> Vec<f64>;
    fn c(&self, t: f64) -> Vec<f64>;
    fn descriptor(&self) -> &str;

    /// Closed time interval on which the system is defined, if bounded.
    fn domain(&self) -> Option<(f64, f64)> {
        None
    }

    fn output(&self, t: f64, x: &[f64]) -> f64 {
        dot(&self.c(t), x)
    }

    /// Fails unless `[t0, t1]` lies inside [`domain`](Self::domain).
    fn check_span(&self, t0: f64, t1: f64) -> Result<()> {
        if let Some((start, end)) = self.domain() {
            let slack = DOMAIN_SLACK * (end - start).abs().max(1.0);
            for t in [t0, t1] {
                if t < start - slack || t > end + slack {
                    return Err(Error::OutOfDomain { t, start, end });
                }
            }
        }
        Ok(())
    }
}

type MatFn = Arc<dyn Fn(f64) -> Matrix + Send + Sync>;
type VecFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// LTV system given by closures.
#[derive(Clone)]
pub struct FnSystem {
    n: usize,
    descriptor: String,
    a: MatFn,
    b: VecFn,
    c: VecFn,
}

impl FnSystem {
    pub fn new<A, B, C>(descriptor: impl Into<String>, n: usize, a: A, b: B, c: C) -> Self
    where
        A: Fn(f64) -> Matrix + Send + Sync + 'static,
        B: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        C: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        FnSystem {
            n,
            descriptor: descriptor.into(),
            a: Arc::new(a),
            b: Arc::new(b),
            c: Arc::new(c),
        }
    }

    /// Time-invariant system with the given matrices.
    pub fn constant(descriptor: impl Into<String>, a: Matrix, b: Vec<f64>, c: Vec<f64>) -> Self {
        let n = a.rows();
        assert!(a.is_square() && b.len() == n && c.len() == n);
        FnSystem::new(
            descriptor,
            n,
            move |_| a.clone(),
            move |_| b.clone(),
            move |_| c.clone(),
        )
    }
}

impl LtvSystem for FnSystem {
    fn dim(&self) -> usize {
        self.n
    }
    fn a(&self, t: f64) -> Matrix {
        (self.a)(t)
    }
    fn b(&self, t: f64) -> Vec<f64> {
        (self.b)(t)
    }
    fn c(&self, t: f64) -> Vec<f64> {
        (self.c)(t)
    }
    fn descriptor(&self) -> &str {
        &self.descriptor
    }
}

impl fmt::Debug for FnSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSystem")
            .field("n", &self.n)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

impl<S: LtvSystem + ?Sized> LtvSystem for Arc<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn a(&self, t: f64) -> Matrix {
        (**self).a(t)
    }
    fn b(&self, t: f64) -> Vec<f64> {
        (**self).b(t)
    }
    fn c(&self, t: f64) -> Vec<f64> {
        (**self).c(t)
    }
    fn descriptor(&self) -> &str {
        (**self).descriptor()
    }
    fn domain(&self) -> Option<(f64, f64)> {
        (**self).domain()
    }
}

/// Scalar time signal, e.g. a measured input `u(t)` or output `y(t)`.
#[derive(Clone)]
pub struct Signal(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Signal {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Signal(Arc::new(f))
    }

    pub fn constant(v: f64) -> Self {
        Signal::new(move |_| v)
    }

    /// Piecewise-linear interpolation of samples; constant extrapolation is
    /// not provided, times outside the sample range clamp to the end values.
    pub fn sampled(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::Table(format!(
                "signal needs matching non-empty samples ({} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        check_increasing(&times)?;
        Ok(Signal::new(move |t| {
            let (i, w) = bracket(&times, t);
            if w == 0.0 {
                values[i]
            } else {
                (1.0 - w) * values[i] + w * values[i + 1]
            }
        }))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

type AffineMat = Arc<dyn Fn(f64, f64, f64) -> Matrix + Send + Sync>;
type AffineVec = Arc<dyn Fn(f64, f64, f64) -> Vec<f64> + Send + Sync>;
type OutputMap = Arc<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>;

/// State-affine system `ẋ = A(u,y,t)x + b(u,y,t)`, `y = C(u,t)ᵀx`.
#[derive(Clone)]
pub struct StateAffineSystem {
    n: usize,
    descriptor: String,
    a: AffineMat,
    b: AffineVec,
    c: OutputMap,
}

impl StateAffineSystem {
    pub fn new<A, B, C>(descriptor: impl Into<String>, n: usize, a: A, b: B, c: C) -> Self
    where
        A: Fn(f64, f64, f64) -> Matrix + Send + Sync + 'static,
        B: Fn(f64, f64, f64) -> Vec<f64> + Send + Sync + 'static,
        C: Fn(f64, f64) -> Vec<f64> + Send + Sync + 'static,
    {
        StateAffineSystem {
            n,
            descriptor: descriptor.into(),
            a: Arc::new(a),
            b: Arc::new(b),
            c: Arc::new(c),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Substitutes measured `u(t)` and `y(t)` into a state-affine system,
/// giving the LTV system `A(t) = A(u(t), y(t), t)` and so on.
pub fn close_over_signals(sys: &StateAffineSystem, u: Signal, y: Signal) -> FnSystem {
    let (a, b, c) = (sys.a.clone(), sys.b.clone(), sys.c.clone());
    let (ua, ya) = (u.clone(), y.clone());
    let (ub, yb) = (u.clone(), y);
    FnSystem::new(
        format!("{} (closed)", sys.descriptor),
        sys.n,
        move |t| a(ua.eval(t), ya.eval(t), t),
        move |t| b(ub.eval(t), yb.eval(t), t),
        move |t| c(u.eval(t), t),
    )
}

/// LTV system given by samples, linearly interpolated in time.
#[derive(Clone, Debug)]
pub struct TabulatedSystem {
    n: usize,
    descriptor: String,
    times: Vec<f64>,
    a: Vec<Matrix>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl TabulatedSystem {
    pub fn new(
        descriptor: impl Into<String>,
        times: Vec<f64>,
        a: Vec<Matrix>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let rows = times.len();
        if rows < 2 {
            return Err(Error::Table("need at least two samples".into()));
        }
        if a.len() != rows || b.len() != rows || c.len() != rows {
            return Err(Error::Table("sample arrays differ in length".into()));
        }
        check_increasing(&times)?;
        let n = a[0].rows();
        for k in 0..rows {
            if a[k].rows() != n || a[k].cols() != n || b[k].len() != n || c[k].len() != n {
                return Err(Error::DimensionMismatch {
                    what: "table row",
                    expected: n,
                    found: a[k].rows().max(b[k].len()).max(c[k].len()),
                });
            }
            let finite = a[k].is_finite()
                && b[k].iter().chain(&c[k]).all(|v| v.is_finite());
            if !finite {
                return Err(Error::Table(format!("non-finite entry at t = {}", times[k])));
            }
        }
        Ok(TabulatedSystem {
            n,
            descriptor: descriptor.into(),
            times,
            a,
            b,
            c,
        })
    }

    /// Parses the delimited format `t, A11..Ann, b1..bn, c1..cn`.
    pub fn from_reader<R: Read>(descriptor: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Table(e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        let n = dim_from_columns(header.len()).ok_or_else(|| {
            Error::Table(format!(
                "{} columns does not match 1 + n² + 2n for any n",
                header.len()
            ))
        })?;
        let expected = table_header(n);
        if header != expected {
            return Err(Error::Table(format!(
                "header must be `{}`",
                expected.join(", ")
            )));
        }

        let (mut times, mut a, mut b, mut c) = (vec![], vec![], vec![], vec![]);
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            let vals = record
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Table(format!("data row {}: {e}", line + 1)))?;
            times.push(vals[0]);
            a.push(Matrix::from_vec(n, n, vals[1..1 + n * n].to_vec()));
            b.push(vals[1 + n * n..1 + n * n + n].to_vec());
            c.push(vals[1 + n * n + n..].to_vec());
        }
        TabulatedSystem::new(descriptor, times, a, b, c)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        TabulatedSystem::from_reader(format!("tabulated:{}", path.display()), file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Table(e.to_string());
        w.write_record(table_header(self.n)).map_err(io)?;
        for k in 0..self.times.len() {
            let row = std::iter::once(self.times[k])
                .chain(self.a[k].as_slice().iter().copied())
                .chain(self.b[k].iter().copied())
                .chain(self.c[k].iter().copied())
                .map(|v| format!("{v:e}"));
            w.write_record(row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn interp_weights(&self, t: f64) -> (usize, f64) {
        let (start, end) = (self.times[0], *self.times.last().unwrap());
        let slack = DOMAIN_SLACK * (end - start).max(1.0);
        assert!(
            t >= start - slack && t <= end + slack,
            "tabulated system evaluated at t = {t} outside [{start}, {end}]; check_span first"
        );
        bracket(&self.times, t)
    }

    fn lerp(lo: &[f64], hi: &[f64], w: f64) -> Vec<f64> {
        if w == 0.0 {
            return lo.to_vec();
        }
        lo.iter()
            .zip(hi)
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }
}

impl LtvSystem for TabulatedSystem {
    fn dim(&self) -> usize {
        self.n
    }
    fn a(&self, t: f64) -> Matrix {
        let (i, w) = self.interp_weights(t);
        let hi = &self.a[(i + 1).min(self.a.len() - 1)];
        Matrix::from_vec(
            self.n,
            self.n,
            Self::lerp(self.a[i].as_slice(), hi.as_slice(), w),
        )
    }
    fn b(&self, t: f64) -> Vec<f64> {
        let (i, w) = self.interp_weights(t);
        Self::lerp(&self.b[i], &self.b[(i + 1).min(self.b.len() - 1)], w)
    }
    fn c(&self, t: f64) -> Vec<f64> {
        let (i, w) = self.interp_weights(t);
        Self::lerp(&self.c[i], &self.c[(i + 1).min(self.c.len() - 1)], w)
    }
    fn descriptor(&self) -> &str {
        &self.descriptor
    }
    fn domain(&self) -> Option<(f64, f64)> {
        Some((self.times[0], *self.times.last().unwrap()))
    }
}

fn table_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for i in 1..=n {
        for j in 1..=n {
            h.push(format!("A{i}{j}"));
        }
    }
    h.extend((1..=n).map(|i| format!("b{i}")));
    h.extend((1..=n).map(|i| format!("c{i}")));
    h
}

fn dim_from_columns(cols: usize) -> Option<usize> {
    (1..=16).find(|n| 1 + n * n + 2 * n == cols)
}

fn check_increasing(times: &[f64]) -> Result<()> {
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Table(format!(
                "time column must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Index `i` and weight `w` such that `t ≈ (1-w)·times[i] + w·times[i+1]`,
/// clamped to the ends.
fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let last = times.len() - 1;
    if t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[last] {
        return (last, 0.0);
    }
    let i = times.partition_point(|&s| s <= t) - 1;
    (i, (t - times[i]) / (times[i + 1] - times[i]))
}

/// Built-in scenario S1: `n = 1`, `a = 0`, `b = cos t`, `C = 1`.
pub fn scalar_drift() -> FnSystem {
    FnSystem::new(
        "S1 scalar-drift",
        1,
        |_| Matrix::zeros(1, 1),
        |t| vec![t.cos()],
        |_| vec![1.0],
    )
}

/// Built-in scenario S2: harmonic rotor `A = [[0,1],[-1,0]]`, `C = (1,0)`.
pub fn rotor() -> FnSystem {
    FnSystem::constant(
        "S2 rotor",
        rotor_generator(),
        vec![0.0, 0.0],
        vec![1.0, 0.0],
    )
}

/// End of the measurement window of [`finite_window_rotor`].
pub const FINITE_WINDOW_END: f64 = 2.0 * PI;

/// Built-in scenario S3: the rotor whose output map switches off after
/// `t = 2π`. Observable on `[0, 2π]` but not uniformly completely observable.
pub fn finite_window_rotor() -> FnSystem {
    FnSystem::new(
        "S3 finite-window rotor",
        2,
        |_| rotor_generator(),
        |_| vec![0.0, 0.0],
        |t| {
            if t <= FINITE_WINDOW_END {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 0.0]
            }
        },
    )
}

fn rotor_generator() -> Matrix {
    Matrix::from_rows(&[[0.0, 1.0], [-1.0, 0.0]])
}

/// Sampled plant response on a grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub grid: OdeGrid,
    pub states: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl Trajectory {
    pub fn max_state_norm(&self) -> f64 {
        self.states
            .iter()
            .map(|x| crate::numerics::norm(x))
            .fold(0.0, f64::max)
    }
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

/// Integrates the plant from `x0` on `grid` with RK4 and records `y = Cᵀx`.
pub fn simulate_plant<S: LtvSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    grid: &OdeGrid,
) -> Result<Trajectory> {
    check_dim("x0", sys.dim(), x0.len())?;
    sys.check_span(grid.t0(), grid.t_final())?;

    let mut states = Vec::with_capacity(grid.len());
    let mut outputs = Vec::with_capacity(grid.len());
    let mut x = x0.to_vec();
    for k in 0..=grid.steps() {
        let t = grid.time(k);
        outputs.push(sys.output(t, &x));
        if k < grid.steps() {
            let next = rk4_step(
                |s, x| {
                    let mut dx = sys.a(s).matvec(x);
                    for (d, bi) in dx.iter_mut().zip(sys.b(s)) {
                        *d += bi;
                    }
                    dx
                },
                t,
                &x,
                grid.dt(),
            )?;
            states.push(std::mem::replace(&mut x, next));
        } else {
            states.push(x.clone());
        }
    }
    Ok(Trajectory {
        grid: *grid,
        states,
        outputs,
    })
}

/// Right-hand side of `Φ̇ = A(t) Φ` on row-major flattened storage.
pub(crate) fn fundamental_rhs<S: LtvSystem + ?Sized>(sys: &S, t: f64, flat: &[f64]) -> Vec<f64> {
    let n = sys.dim();
    sys.a(t)
        .matmul(&Matrix::from_vec(n, n, flat.to_vec()))
        .into_vec()
}

/// `Φ(t1, t0)` by RK4 integration of `Φ̇ = A(t)Φ`, `Φ(t0, t0) = I`.
///
/// The interval is split into the fewest equal steps not exceeding `dt`.
pub fn transition_matrix<S: LtvSystem + ?Sized>(
    sys: &S,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Matrix> {
    if t1 < t0 {
        return Err(Error::InvalidGrid(format!("t1 ({t1}) before t0 ({t0})")));
    }
    let n = sys.dim();
    if t1 == t0 {
        return Ok(Matrix::identity(n));
    }
    sys.check_span(t0, t1)?;
    let grid = OdeGrid::covering(t0, t1, dt)?;
    let mut phi = Matrix::identity(n).into_vec();
    for k in 0..grid.steps() {
        phi = rk4_step(|s, p| fundamental_rhs(sys, s, p), grid.time(k), &phi, grid.dt())?;
    }
    Ok(Matrix::from_vec(n, n, phi))
}

/// Observability Grammian `W(t0, t1) = ∫ Φᵀ(τ,t0) C Cᵀ Φ(τ,t0) dτ`.
///
/// `Φ` is integrated with RK4 on the covering grid of step `≤ dt`, and the
/// integral is the composite trapezoid rule on the same grid points.
pub fn observability_grammian<S: LtvSystem + ?Sized>(
    sys: &S,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<Matrix> {
    let n = sys.dim();
    sys.check_span(t0, t1)?;
    let grid = OdeGrid::covering(t0, t1, dt)?;
    let mut phi = Matrix::identity(n).into_vec();
    let mut w = Matrix::zeros(n, n);
    for k in 0..=grid.steps() {
        let t = grid.time(k);
        let weight = if k == 0 || k == grid.steps() {
            0.5 * grid.dt()
        } else {
            grid.dt()
        };
        let psi = Matrix::from_vec(n, n, phi.clone()).tr_matvec(&sys.c(t));
        accumulate_outer(&mut w, &psi, weight);
        if k < grid.steps() {
            phi = rk4_step(|s, p| fundamental_rhs(sys, s, p), t, &phi, grid.dt())?;
        }
    }
    w.symmetrize();
    Ok(w)
}

pub(crate) fn accumulate_outer(acc: &mut Matrix, v: &[f64], weight: f64) {
    let n = v.len();
    for i in 0..n {
        let wi = weight * v[i];
        if wi == 0.0 {
            continue;
        }
        for j in 0..n {
            acc[(i, j)] += wi * v[j];
        }
    }
}

/// Number of start times `τ` probed by [`uniform_stability_bound`].
pub const STABILITY_START_POINTS: usize = 8;

/// Empirical estimate of `c₁ = sup ‖Φ(t, τ)‖` over `0 ≤ τ ≤ t ≤ horizon`.
///
/// Start times `τ` are spread evenly over `[0, horizon)`; for each, `Φ(·, τ)`
/// is integrated to the horizon and its spectral norm checked at every grid
/// point. A diagnostic, not a proof of uniform stability.
pub fn uniform_stability_bound<S: LtvSystem + ?Sized>(
    sys: &S,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    uniform_stability_bound_with(sys, horizon, dt, Exec::default())
}

pub fn uniform_stability_bound_with<S: LtvSystem + ?Sized>(
    sys: &S,
    horizon: f64,
    dt: f64,
    exec: Exec,
) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidGrid(format!("horizon must be positive, got {horizon}")));
    }
    sys.check_span(0.0, horizon)?;
    let n = sys.dim();
    let starts: Vec<f64> = (0..STABILITY_START_POINTS)
        .map(|j| horizon * j as f64 / STABILITY_START_POINTS as f64)
        .collect();
    let per_start = exec.map(&starts, |&tau| -> Result<f64> {
        let grid = OdeGrid::covering(tau, horizon, dt)?;
        let mut phi = Matrix::identity(n).into_vec();
        let mut worst: f64 = 1.0;
        for k in 0..grid.steps() {
            phi = rk4_step(|s, p| fundamental_rhs(sys, s, p), grid.time(k), &phi, grid.dt())?;
            worst = worst.max(spectral_norm(&Matrix::from_vec(n, n, phi.clone())));
        }
        Ok(worst)
    });
    per_start
        .into_iter()
        .try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v)))
}
