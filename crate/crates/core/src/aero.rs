//! Static aerodynamic maps and the algebraic rotor torque and thrust relations.
//!
//! Coefficients are tabulated over tip-speed ratio and pitch angle (degrees)
//! and evaluated by clamped bilinear interpolation. The default tables are
//! sampled from an analytic power-coefficient surrogate, and user tables can be
//! loaded from CSV (see `docs/formats.md`).

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

/// Wind speed floor below which the tip-speed ratio is treated as undefined.
pub const DEFAULT_WIND_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeroConstants {
    /// Air density (kg/m^3).
    pub rho: f64,
    /// Rotor radius (m).
    pub radius: f64,
}

impl AeroConstants {
    pub fn new(rho: f64, radius: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param("rho", "must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("radius", "must be positive"));
        }
        Ok(Self { rho, radius })
    }

    /// `1/2 rho pi R^3`, the torque scale in front of `v^2 cQ`.
    pub fn torque_scale(&self) -> f64 {
        0.5 * self.rho * PI * self.radius.powi(3)
    }

    /// `1/2 rho pi R^2`, the thrust scale in front of `v^2 cT`.
    pub fn thrust_scale(&self) -> f64 {
        0.5 * self.rho * PI * self.radius.powi(2)
    }
}

/// Torque and thrust coefficient pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub cq: f64,
    pub ct: f64,
}

/// Coefficients together with their partial derivatives with respect to the
/// tip-speed ratio and the pitch angle in degrees. Derivatives are zero along
/// a clamped axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientGradient {
    pub value: Coefficients,
    pub dcq_dlambda: f64,
    pub dcq_dbeta: f64,
    pub dct_dlambda: f64,
    pub dct_dbeta: f64,
}

/// Tabulated `cQ(lambda, beta)` and `cT(lambda, beta)` surfaces.
///
/// Tables are stored row-major, indexed `[lambda][beta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroMaps {
    lambda_grid: Vec<f64>,
    beta_grid: Vec<f64>,
    cq_table: Vec<f64>,
    ct_table: Vec<f64>,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::param(name, "needs at least two samples"));
    }
    if grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::param(name, "contains non-finite samples"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(name, "must be strictly ascending"));
    }
    Ok(())
}

/// Cell index and fractional position of `x` on `grid`, clamped to its ends.
/// The returned flag is true when `x` was outside the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64, bool) {
    let n = grid.len();
    if x <= grid[0] {
        return (0, 0.0, x < grid[0]);
    }
    if x >= grid[n - 1] {
        return (n - 2, 1.0, x > grid[n - 1]);
    }
    // first index with grid[i] > x, so grid[i-1] <= x < grid[i]
    let upper = grid.partition_point(|&g| g <= x);
    let i = upper - 1;
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    (i, t, false)
}

impl AeroMaps {
    pub fn new(
        lambda_grid: Vec<f64>,
        beta_grid: Vec<f64>,
        cq_table: Vec<Vec<f64>>,
        ct_table: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_grid("lambda_grid", &lambda_grid)?;
        check_grid("beta_grid", &beta_grid)?;
        let flatten = |name: &str, table: Vec<Vec<f64>>| -> Result<Vec<f64>> {
            if table.len() != lambda_grid.len() {
                return Err(Error::param(
                    name,
                    format!(
                        "has {} rows, lambda_grid has {} samples",
                        table.len(),
                        lambda_grid.len()
                    ),
                ));
            }
            let mut flat = Vec::with_capacity(lambda_grid.len() * beta_grid.len());
            for (i, row) in table.into_iter().enumerate() {
                if row.len() != beta_grid.len() {
                    return Err(Error::param(
                        name,
                        format!(
                            "row {i} has {} columns, beta_grid has {} samples",
                            row.len(),
                            beta_grid.len()
                        ),
                    ));
                }
                if row.iter().any(|c| !c.is_finite()) {
                    return Err(Error::param(name, format!("row {i} has non-finite values")));
                }
                flat.extend(row);
            }
            Ok(flat)
        };
        let cq_table = flatten("cq_table", cq_table)?;
        let ct_table = flatten("ct_table", ct_table)?;
        Ok(Self {
            lambda_grid,
            beta_grid,
            cq_table,
            ct_table,
        })
    }

    /// Maps sampled from the analytic surrogate on lambda in [0, 20] (step 0.5)
    /// and beta in {0, 2, ..., 90} degrees.
    pub fn surrogate() -> Self {
        let lambda: Vec<f64> = (0..=40).map(|i| 0.5 * i as f64).collect();
        let beta: Vec<f64> = (0..=45).map(|j| 2.0 * j as f64).collect();
        Self::from_fn(lambda, beta, |l, b| {
            let cp = surrogate::power_coefficient(l, b);
            let cq = if l > 0.0 { cp / l } else { 0.0 };
            Coefficients {
                cq,
                ct: surrogate::thrust_from_power(cp),
            }
        })
        .expect("surrogate grid is valid")
    }

    /// Tabulate an arbitrary coefficient function on the given grids.
    pub fn from_fn(
        lambda_grid: Vec<f64>,
        beta_grid: Vec<f64>,
        f: impl Fn(f64, f64) -> Coefficients,
    ) -> Result<Self> {
        let mut cq = Vec::with_capacity(lambda_grid.len());
        let mut ct = Vec::with_capacity(lambda_grid.len());
        for &l in &lambda_grid {
            let (q, t): (Vec<f64>, Vec<f64>) = beta_grid
                .iter()
                .map(|&b| {
                    let c = f(l, b);
                    (c.cq, c.ct)
                })
                .unzip();
            cq.push(q);
            ct.push(t);
        }
        Self::new(lambda_grid, beta_grid, cq, ct)
    }

    /// Load a pair of coefficient tables, one CSV file per coefficient.
    /// Both files must share the same grids.
    pub fn from_csv_files(cq_path: &Path, ct_path: &Path) -> Result<Self> {
        let (lq, bq, cq) = read_table_csv(cq_path)?;
        let (lt, bt, ct) = read_table_csv(ct_path)?;
        if lq != lt || bq != bt {
            return Err(Error::MapFile {
                path: ct_path.to_path_buf(),
                reason: format!("grid differs from {}", cq_path.display()),
            });
        }
        Self::new(lq, bq, cq, ct).map_err(|e| Error::MapFile {
            path: cq_path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn lambda_grid(&self) -> &[f64] {
        &self.lambda_grid
    }

    pub fn beta_grid(&self) -> &[f64] {
        &self.beta_grid
    }

    pub fn cq_at(&self, i: usize, j: usize) -> f64 {
        self.cq_table[i * self.beta_grid.len() + j]
    }

    pub fn ct_at(&self, i: usize, j: usize) -> f64 {
        self.ct_table[i * self.beta_grid.len() + j]
    }

    pub fn cq_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.cq_table.chunks(self.beta_grid.len())
    }

    pub fn ct_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.ct_table.chunks(self.beta_grid.len())
    }

    /// Bilinear coefficient lookup, clamped to the grid boundary.
    pub fn lookup(&self, lambda: f64, beta_deg: f64) -> Coefficients {
        self.lookup_with_gradient(lambda, beta_deg).value
    }

    pub fn lookup_with_gradient(&self, lambda: f64, beta_deg: f64) -> CoefficientGradient {
        let (i, tl, clamped_l) = locate(&self.lambda_grid, lambda);
        let (j, tb, clamped_b) = locate(&self.beta_grid, beta_deg);
        let dl = self.lambda_grid[i + 1] - self.lambda_grid[i];
        let db = self.beta_grid[j + 1] - self.beta_grid[j];
        let nb = self.beta_grid.len();
        let eval = |table: &[f64]| {
            let c00 = table[i * nb + j];
            let c01 = table[i * nb + j + 1];
            let c10 = table[(i + 1) * nb + j];
            let c11 = table[(i + 1) * nb + j + 1];
            let lo = (1.0 - tb) * c00 + tb * c01;
            let hi = (1.0 - tb) * c10 + tb * c11;
            let value = (1.0 - tl) * lo + tl * hi;
            let d_lambda = if clamped_l { 0.0 } else { (hi - lo) / dl };
            let d_beta = if clamped_b {
                0.0
            } else {
                ((1.0 - tl) * (c01 - c00) + tl * (c11 - c10)) / db
            };
            (value, d_lambda, d_beta)
        };
        let (cq, dcq_dlambda, dcq_dbeta) = eval(&self.cq_table);
        let (ct, dct_dlambda, dct_dbeta) = eval(&self.ct_table);
        CoefficientGradient {
            value: Coefficients { cq, ct },
            dcq_dlambda,
            dcq_dbeta,
            dct_dlambda,
            dct_dbeta,
        }
    }

    /// Smallest and largest entries of the (cQ, cT) tables.
    pub fn table_bounds(&self) -> ((f64, f64), (f64, f64)) {
        let bounds = |t: &[f64]| {
            t.iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                    (lo.min(x), hi.max(x))
                })
        };
        (bounds(&self.cq_table), bounds(&self.ct_table))
    }
}

/// Analytic surrogate used to generate the default tables.
pub mod surrogate {
    /// Exponential-family power coefficient with pitch in degrees,
    /// `cP = 0.73 (151/li - 0.58 b - 0.002 b^2.14 - 13.2) exp(-18.4/li)` with
    /// `1/li = 1/(lambda - 0.02 b) - 0.003/(b^3 + 1)`. Zero where
    /// `lambda <= 0.02 b`, which is the continuous limit from above.
    pub fn power_coefficient(lambda: f64, beta_deg: f64) -> f64 {
        let b = beta_deg;
        let denom = lambda - 0.02 * b;
        if denom <= 0.0 {
            return 0.0;
        }
        let inv_li = 1.0 / denom - 0.003 / (b.powi(3) + 1.0);
        0.73 * (151.0 * inv_li - 0.58 * b - 0.002 * b.powf(2.14) - 13.2) * (-18.4 * inv_li).exp()
    }

    /// Thrust coefficient consistent with a power coefficient through ideal
    /// actuator-disc momentum theory: `cP = 4a(1-a)^2`, `cT = 4a(1-a)` on the
    /// branch `a < 1/3`, where `cP` is monotone in `a`.
    pub fn thrust_from_power(cp: f64) -> f64 {
        let cp_of = |a: f64| 4.0 * a * (1.0 - a) * (1.0 - a);
        let cp = cp.min(cp_of(1.0 / 3.0));
        let (mut lo, mut hi) = (-1.0, 1.0 / 3.0);
        while cp_of(lo) > cp {
            lo *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cp_of(mid) < cp {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let a = 0.5 * (lo + hi);
        4.0 * a * (1.0 - a)
    }
}

/// Read one coefficient table from CSV. The header row is `lambda \ beta`
/// followed by the pitch grid in degrees; each subsequent row is a
/// tip-speed ratio followed by coefficient values.
pub fn read_table_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let err = |reason: String| Error::MapFile {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| err(e.to_string()))?;
    let header = reader.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(err("header must list at least two pitch angles".into()));
    }
    let parse = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| err(format!("cannot parse {what} `{s}`")))
    };
    let beta = header
        .iter()
        .skip(1)
        .map(|s| parse(s, "pitch angle"))
        .collect::<Result<Vec<_>>>()?;
    let mut lambda = Vec::new();
    let mut table = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| err(e.to_string()))?;
        if record.len() != beta.len() + 1 {
            return Err(err(format!(
                "row {} has {} fields, expected {}",
                row_no + 1,
                record.len(),
                beta.len() + 1
            )));
        }
        lambda.push(parse(&record[0], "tip speed ratio")?);
        table.push(
            record
                .iter()
                .skip(1)
                .map(|s| parse(s, "coefficient"))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    check_grid("lambda_grid", &lambda).map_err(|e| err(e.to_string()))?;
    check_grid("beta_grid", &beta).map_err(|e| err(e.to_string()))?;
    Ok((lambda, beta, table))
}

/// Write one coefficient table in the format accepted by [`read_table_csv`].
pub fn write_table_csv<'a>(
    path: &Path,
    lambda: &[f64],
    beta: &[f64],
    rows: impl Iterator<Item = &'a [f64]>,
) -> Result<()> {
    let io = |e: csv::Error| Error::MapFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let mut header = vec!["lambda \\ beta".to_string()];
    header.extend(beta.iter().map(|b| format!("{b}")));
    w.write_record(&header).map_err(io)?;
    for (l, row) in lambda.iter().zip(rows) {
        let mut rec = vec![format!("{l}")];
        rec.extend(row.iter().map(|c| format!("{c:e}")));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Tip-speed ratio `omega_r R / v`.
pub fn tip_speed_ratio(omega_r: f64, v: f64, radius: f64, v_min: f64) -> Result<f64> {
    if !(v > v_min) {
        return Err(Error::LowWind { v, floor: v_min });
    }
    Ok(omega_r * radius / v)
}

/// Interpolated `(cQ, cT)` at `(lambda, beta)`; `beta` in degrees.
pub fn coefficient_lookup(maps: &AeroMaps, lambda: f64, beta_deg: f64) -> Coefficients {
    maps.lookup(lambda, beta_deg)
}

/// Aerodynamic rotor torque `1/2 rho pi R^3 v^2 cQ`; `beta` in degrees.
pub fn rotor_torque(
    v: f64,
    omega_r: f64,
    beta_deg: f64,
    consts: &AeroConstants,
    maps: &AeroMaps,
) -> Result<f64> {
    let lambda = tip_speed_ratio(omega_r, v, consts.radius, DEFAULT_WIND_FLOOR)?;
    Ok(consts.torque_scale() * v * v * maps.lookup(lambda, beta_deg).cq)
}

/// Aerodynamic rotor thrust `1/2 rho pi R^2 v^2 cT`; `beta` in degrees.
pub fn rotor_thrust(
    v: f64,
    omega_r: f64,
    beta_deg: f64,
    consts: &AeroConstants,
    maps: &AeroMaps,
) -> Result<f64> {
    let lambda = tip_speed_ratio(omega_r, v, consts.radius, DEFAULT_WIND_FLOOR)?;
    Ok(consts.thrust_scale() * v * v * maps.lookup(lambda, beta_deg).ct)
}

/// Rotor torque and thrust with partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorLoads {
    pub torque: f64,
    pub thrust: f64,
    pub dtorque_domega: f64,
    /// Per radian of pitch.
    pub dtorque_dbeta: f64,
    pub dthrust_domega: f64,
    /// Per radian of pitch.
    pub dthrust_dbeta: f64,
    pub dtorque_dv: f64,
}

/// Constants, maps and wind floor bundled for repeated evaluation with the
/// pitch angle in radians, as carried by the dynamic states.
#[derive(Debug, Clone, PartialEq)]
pub struct Aerodynamics {
    pub constants: AeroConstants,
    pub maps: AeroMaps,
    pub wind_floor: f64,
}

impl Aerodynamics {
    pub fn new(constants: AeroConstants, maps: AeroMaps) -> Self {
        Self {
            constants,
            maps,
            wind_floor: DEFAULT_WIND_FLOOR,
        }
    }

    pub fn torque(&self, v: f64, omega_r: f64, beta_rad: f64) -> Result<f64> {
        Ok(self.loads(v, omega_r, beta_rad)?.torque)
    }

    pub fn thrust(&self, v: f64, omega_r: f64, beta_rad: f64) -> Result<f64> {
        Ok(self.loads(v, omega_r, beta_rad)?.thrust)
    }

    pub fn loads(&self, v: f64, omega_r: f64, beta_rad: f64) -> Result<RotorLoads> {
        let r = self.constants.radius;
        let lambda = tip_speed_ratio(omega_r, v, r, self.wind_floor)?;
        let g = self
            .maps
            .lookup_with_gradient(lambda, beta_rad.to_degrees());
        let qs = self.constants.torque_scale() * v * v;
        let ts = self.constants.thrust_scale() * v * v;
        let dlambda_domega = r / v;
        let deg_per_rad = 180.0 / PI;
        Ok(RotorLoads {
            torque: qs * g.value.cq,
            thrust: ts * g.value.ct,
            dtorque_domega: qs * g.dcq_dlambda * dlambda_domega,
            dtorque_dbeta: qs * g.dcq_dbeta * deg_per_rad,
            dthrust_domega: ts * g.dct_dlambda * dlambda_domega,
            dthrust_dbeta: ts * g.dct_dbeta * deg_per_rad,
            dtorque_dv: self.constants.torque_scale()
                * (2.0 * v * g.value.cq - omega_r * r * g.dcq_dlambda),
        })
    }
}
