//! Adaptive Dormand–Prince 8(5,3) integrator (Hairer's DOP853 coefficients).
//!
//! The stepper always lands exactly on the requested end time, so callers can
//! sample a trajectory on an output grid without interpolation.

use crate::error::{Error, Result};

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

// Rows of the Butcher matrix for stages 2..=12.
const A: [&[f64]; 12] = [
    &[],
    &[5.26001519587677318785587544488E-2],
    &[1.97250569845378994544595329183E-2, 5.91751709536136983633785987549E-2],
    &[2.95875854768068491816892993775E-2, 0.0, 8.87627564304205475450678981324E-2],
    &[
        2.41365134159266685502369798665E-1,
        0.0,
        -8.84549479328286085344864962717E-1,
        9.24834003261792003115737966543E-1,
    ],
    &[
        3.7037037037037037037037037037E-2,
        0.0,
        0.0,
        1.70828608729473871279604482173E-1,
        1.25467687566822425016691814123E-1,
    ],
    &[
        3.7109375E-2,
        0.0,
        0.0,
        1.70252211019544039314978060272E-1,
        6.02165389804559606850219397283E-2,
        -1.7578125E-2,
    ],
    &[
        3.70920001185047927108779319836E-2,
        0.0,
        0.0,
        1.70383925712239993810214054705E-1,
        1.07262030446373284651809199168E-1,
        -1.53194377486244017527936158236E-2,
        8.27378916381402288758473766002E-3,
    ],
    &[
        6.24110958716075717114429577812E-1,
        0.0,
        0.0,
        -3.36089262944694129406857109825E0,
        -8.68219346841726006818189891453E-1,
        2.75920996994467083049415600797E1,
        2.01540675504778934086186788979E1,
        -4.34898841810699588477366255144E1,
    ],
    &[
        4.77662536438264365890433908527E-1,
        0.0,
        0.0,
        -2.48811461997166764192642586468E0,
        -5.90290826836842996371446475743E-1,
        2.12300514481811942347288949897E1,
        1.52792336328824235832596922938E1,
        -3.32882109689848629194453265587E1,
        -2.03312017085086261358222928593E-2,
    ],
    &[
        -9.3714243008598732571704021658E-1,
        0.0,
        0.0,
        5.18637242884406370830023853209E0,
        1.09143734899672957818500254654E0,
        -8.14978701074692612513997267357E0,
        -1.85200656599969598641566180701E1,
        2.27394870993505042818970056734E1,
        2.49360555267965238987089396762E0,
        -3.0467644718982195003823669022E0,
    ],
    &[
        2.27331014751653820792359768449E0,
        0.0,
        0.0,
        -1.05344954667372501984066689879E1,
        -2.00087205822486249909675718444E0,
        -1.79589318631187989172765950534E1,
        2.79488845294199600508499808837E1,
        -2.85899827713502369474065508674E0,
        -8.87285693353062954433549289258E0,
        1.23605671757943030647266201528E1,
        6.43392746015763530355970484046E-1,
    ],
];

const B: [f64; 12] = [
    5.42937341165687622380535766363E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566E0,
    1.89151789931450038304281599044E0,
    -5.8012039600105847814672114227E0,
    3.1116436695781989440891606237E-1,
    -1.52160949662516078556178806805E-1,
    2.01365400804030348374776537501E-1,
    4.47106157277725905176885569043E-2,
];

// Fifth-order error weights.
const E5: [f64; 12] = [
    0.1312004499419488073250102996E-01,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753E+01,
    -0.4957589496572501915214079952E+00,
    0.1664377182454986536961530415E+01,
    -0.3503288487499736816886487290E+00,
    0.3341791187130174790297318841E+00,
    0.8192320648511571246570742613E-01,
    -0.2235530786388629525884427845E-01,
];

// Third-order error weights on stages 1, 9 and 12.
const BHH: [f64; 3] = [
    0.244094488188976377952755905512E+00,
    0.733846688281611857341361741547E+00,
    0.220588235294117647058823529412E-01,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

/// Step counters accumulated over the lifetime of an integrator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Embedded 8(5,3) Runge–Kutta stepper for `y' = f(t, y)`.
#[derive(Debug, Clone)]
pub struct Dop853 {
    rtol: f64,
    atol: f64,
    max_steps: usize,
    h: Option<f64>,
    stats: StepStats,
    stages: Vec<Vec<f64>>,
    scratch: Vec<f64>,
}

impl Dop853 {
    pub fn new(rtol: f64, atol: f64, max_steps: usize) -> Self {
        Self { rtol, atol, max_steps, h: None, stats: StepStats::default(), stages: Vec::new(), scratch: Vec::new() }
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    fn scale(&self, y: &[f64], i: usize, other: f64) -> f64 {
        self.atol + self.rtol * y[i].abs().max(other.abs())
    }

    fn initial_step<F>(&mut self, f: &mut F, t: f64, y: &[f64], f0: &[f64], span: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..n {
            let sk = self.atol + self.rtol * y[i].abs();
            dnf += (f0[i] / sk).powi(2);
            dny += (y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(span.abs());
        let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h * b).collect();
        let mut f1 = vec![0.0; n];
        f(t + h, &y1, &mut f1);
        self.stats.evaluations += 1;
        let mut der2: f64 = 0.0;
        for i in 0..n {
            let sk = self.atol + self.rtol * y[i].abs();
            der2 += ((f1[i] - f0[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        (100.0 * h).min(h1).min(span.abs())
    }

    /// Advances `y` from `t0` to exactly `t1 > t0`.
    pub fn advance<F>(&mut self, f: &mut F, t0: f64, y: &mut [f64], t1: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let span = t1 - t0;
        if span == 0.0 {
            return Ok(());
        }
        if !(span > 0.0) {
            return Err(Error::InvalidArgument(format!("integration must move forward in time ({t0} -> {t1})")));
        }
        let n = y.len();
        if self.stages.len() != 12 || self.stages[0].len() != n {
            self.stages = vec![vec![0.0; n]; 12];
            self.scratch = vec![0.0; n];
        }
        let mut k = std::mem::take(&mut self.stages);
        let mut ytmp = std::mem::take(&mut self.scratch);
        let result = self.run(f, t0, y, t1, &mut k, &mut ytmp);
        self.stages = k;
        self.scratch = ytmp;
        result
    }

    fn run<F>(&mut self, f: &mut F, t0: f64, y: &mut [f64], t1: f64, k: &mut [Vec<f64>], ytmp: &mut [f64]) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        let mut t = t0;
        f(t, y, &mut k[0]);
        self.stats.evaluations += 1;
        let mut h = match self.h {
            Some(h) => h,
            None => {
                let f0 = k[0].clone();
                self.initial_step(f, t, y, &f0, t1 - t0)
            }
        };
        let mut rejected_last = false;
        let mut y_new = vec![0.0; n];
        let mut steps = 0usize;

        loop {
            if steps >= self.max_steps {
                return Err(Error::StepBudget { t, max_steps: self.max_steps });
            }
            if 0.1 * h.abs() <= f64::EPSILON * t.abs() || h <= f64::MIN_POSITIVE {
                return Err(Error::StepUnderflow { t });
            }
            let mut last = false;
            let h_free = h;
            if t + 1.01 * h >= t1 {
                h = t1 - t;
                last = true;
            }
            steps += 1;

            for s in 1..12 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, a) in A[s].iter().enumerate() {
                        if *a != 0.0 {
                            acc += a * k[j][i];
                        }
                    }
                    ytmp[i] = y[i] + h * acc;
                }
                f(t + C[s] * h, ytmp, &mut k[s]);
            }
            self.stats.evaluations += 11;

            let mut err5 = 0.0;
            let mut err3 = 0.0;
            let mut finite = true;
            for i in 0..n {
                let mut incr = 0.0;
                let mut e5 = 0.0;
                for s in 0..12 {
                    incr += B[s] * k[s][i];
                    e5 += E5[s] * k[s][i];
                }
                let e3 = incr - BHH[0] * k[0][i] - BHH[1] * k[8][i] - BHH[2] * k[11][i];
                y_new[i] = y[i] + h * incr;
                if !y_new[i].is_finite() {
                    finite = false;
                }
                let sk = self.scale(y, i, y_new[i]);
                err5 += (e5 / sk).powi(2);
                err3 += (e3 / sk).powi(2);
            }
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h.abs() * err5 * (1.0 / (deno * n as f64)).sqrt();

            if !finite || !err.is_finite() {
                self.stats.rejected += 1;
                h *= 0.1;
                rejected_last = true;
                if !finite && h < 1e-300 {
                    return Err(Error::NonFiniteState { t });
                }
                continue;
            }

            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;

            if err <= 1.0 {
                self.stats.accepted += 1;
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&y_new);
                if rejected_last {
                    h_new = h_new.min(h);
                }
                rejected_last = false;
                if last {
                    // a step shortened to hit t1 says little about the natural step size
                    self.h = Some(if h < h_free { h_free.min(h_new.max(h)) } else { h_new });
                    return Ok(());
                }
                f(t, y, &mut k[0]);
                self.stats.evaluations += 1;
                h = h_new;
            } else {
                self.stats.rejected += 1;
                h = h / (1.0 / FAC_MIN).min(fac11 / SAFETY);
                rejected_last = true;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_consistent_with_nodes() {
        for s in 1..12 {
            let sum: f64 = A[s].iter().sum();
            assert!((sum - C[s]).abs() < 1e-12, "row {s}: {sum} vs {}", C[s]);
        }
        let bsum: f64 = B.iter().sum();
        assert!((bsum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_decay_to_high_accuracy() {
        let mut solver = Dop853::new(1e-12, 1e-14, 100_000);
        let mut y = vec![1.0];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0];
        solver.advance(&mut f, 0.0, &mut y, 5.0).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn lands_exactly_on_sequential_targets() {
        let mut solver = Dop853::new(1e-10, 1e-12, 100_000);
        let mut y = vec![0.0, 1.0];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut t = 0.0;
        for k in 1..=100 {
            let t1 = k as f64 * 0.1;
            solver.advance(&mut f, t, &mut y, t1).unwrap();
            t = t1;
        }
        assert!((y[0] - 10f64.sin()).abs() < 1e-9);
        assert!((y[1] - 10f64.cos()).abs() < 1e-9);
        assert!(solver.stats().accepted > 0);
    }

    #[test]
    fn blow_up_is_reported() {
        let mut solver = Dop853::new(1e-10, 1e-12, 1_000_000);
        let mut y = vec![1.0];
        let mut f = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0];
        let err = solver.advance(&mut f, 0.0, &mut y, 2.0).unwrap_err();
        assert!(
            matches!(err, Error::StepUnderflow { .. } | Error::NonFiniteState { .. } | Error::StepBudget { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn backwards_interval_rejected() {
        let mut solver = Dop853::new(1e-10, 1e-12, 10);
        let mut y = vec![1.0];
        let mut f = |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        assert!(solver.advance(&mut f, 1.0, &mut y, 0.5).is_err());
    }
}
