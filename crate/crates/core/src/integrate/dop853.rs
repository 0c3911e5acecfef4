//! Dormand–Prince 8(5,3) tableau and a generic adaptive stepper over
//! fixed-size states.

use std::ops::ControlFlow;

pub(crate) const STAGES: usize = 12;

pub(crate) const C: [f64; STAGES] = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
];

#[rustfmt::skip]
pub(crate) const A: [[f64; STAGES]; STAGES] = [
    [0.0; STAGES],
    [5.26001519587677318785587544488e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.41365134159266685502369798665e-1, 0.0, -8.84549479328286085344864962717e-1, 9.24834003261792003115737966543e-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7037037037037037037037037037e-2, 0.0, 0.0, 1.70828608729473871279604482173e-1, 1.25467687566822425016691814123e-1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.7109375e-2, 0.0, 0.0, 1.70252211019544039314978060272e-1, 6.02165389804559606850219397283e-2, -1.7578125e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.70920001185047927108779319836e-2, 0.0, 0.0, 1.70383925712239993810214054705e-1, 1.07262030446373284651809199168e-1, -1.53194377486244017527936158236e-2, 8.27378916381402288758473766002e-3, 0.0, 0.0, 0.0, 0.0, 0.0],
    [6.24110958716075717114429577812e-1, 0.0, 0.0, -3.36089262944694129406857109825, -8.68219346841726006818189891453e-1, 2.75920996994467083049415600797e1, 2.01540675504778934086186788979e1, -4.34898841810699588477366255144e1, 0.0, 0.0, 0.0, 0.0],
    [4.77662536438264365890433908527e-1, 0.0, 0.0, -2.48811461997166764192642586468, -5.90290826836842996371446475743e-1, 2.12300514481811942347288949897e1, 1.52792336328824235832596922938e1, -3.32882109689848629194453265587e1, -2.03312017085086261358222928593e-2, 0.0, 0.0, 0.0],
    [-9.3714243008598732571704021658e-1, 0.0, 0.0, 5.18637242884406370830023853209, 1.09143734899672957818500254654, -8.14978701074692612513997267357, -1.85200656599969598641566180701e1, 2.27394870993505042818970056734e1, 2.49360555267965238987089396762, -3.0467644718982195003823669022, 0.0, 0.0],
    [2.27331014751653820792359768449, 0.0, 0.0, -1.05344954667372501984066689879e1, -2.00087205822486249909675718444, -1.79589318631187989172765950534e1, 2.79488845294199600508499808837e1, -2.85899827713502369474065508674, -8.87285693353062954433549289258, 1.23605671757943030647266201528e1, 6.43392746015763530355970484046e-1, 0.0],
];

pub(crate) const B: [f64; STAGES] = [
    5.42937341165687622380535766363e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.45031289275240888144113950566,
    1.89151789931450038304281599044,
    -5.8012039600105847814672114227,
    3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1,
    2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
];

/// Weights of the 3rd-order error estimate (relative to `B`).
const E3: [f64; STAGES] = [
    B[0] - 0.244094488188976377952755905512,
    0.0,
    0.0,
    0.0,
    0.0,
    B[5],
    B[6],
    B[7],
    B[8] - 0.733846688281611857341361741547,
    B[9],
    B[10],
    B[11] - 0.220588235294117647058823529412e-1,
];

/// Weights of the 5th-order error estimate.
const E5: [f64; STAGES] = [
    0.1312004499419488073250102996e-1,
    0.0,
    0.0,
    0.0,
    0.0,
    -0.1225156446376204440720569753e+1,
    -0.4957589496572501915214079952,
    0.1664377182454986536961530415e+1,
    -0.3503288487499736816886487290,
    0.3341791187130174790297318841,
    0.8192320648511571246570742613e-1,
    -0.2235530786388629525884427845e-1,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const ERROR_EXPONENT: f64 = -1.0 / 8.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub abs: f64,
    pub rel: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Failure<const N: usize> {
    StepLimit { t: f64, y: [f64; N] },
    Underflow { t: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Outcome<const N: usize> {
    Reached([f64; N]),
    Stopped { t: f64, y: [f64; N] },
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[[f64; N]], w: &[f64]) -> [f64; N] {
    let mut out = *y;
    for (kj, &wj) in k.iter().zip(w) {
        if wj != 0.0 {
            for i in 0..N {
                out[i] += h * wj * kj[i];
            }
        }
    }
    out
}

fn rms_scaled<const N: usize>(
    k: &[[f64; N]; STAGES + 1],
    w: &[f64; STAGES],
    scale: &[f64; N],
) -> f64 {
    let mut sum = 0.0;
    for i in 0..N {
        let mut e = 0.0;
        for j in 0..STAGES {
            e += w[j] * k[j][i];
        }
        let v = e / scale[i];
        sum += v * v;
    }
    sum
}

fn initial_step<const N: usize, F>(
    f: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    direction: f64,
    tol: &Tolerances,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += direction * h0 * f0[i];
    }
    let f1 = f(t0 + direction * h0, &y1);
    let mut d2 = 0.0;
    for i in 0..N {
        let sc = tol.abs + tol.rel * y0[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    let d2 = (d2 / N as f64).sqrt() / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 8.0)
    };
    (100.0 * h0).min(h1).min(tol.max_step)
}

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction), landing on
/// `t1` exactly. `hint` carries the step-size proposal between calls. The
/// observer sees every accepted step and may stop the integration early.
pub(crate) fn solve<const N: usize, F, O>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    tol: &Tolerances,
    hint: &mut Option<f64>,
    mut observer: O,
) -> Result<Outcome<N>, Failure<N>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
{
    if t1 == t0 {
        return Ok(Outcome::Reached(y0));
    }
    let direction = (t1 - t0).signum();
    let mut t = t0;
    let mut y = y0;
    let mut k = [[0.0; N]; STAGES + 1];
    k[0] = f(t, &y);
    let mut h_abs = match *hint {
        Some(h) if h > 0.0 => h.min(tol.max_step),
        _ => initial_step(f, t0, &y0, &k[0], direction, tol),
    };
    let mut steps = 0usize;
    let mut rejected = false;

    loop {
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        if h_abs < min_step {
            return Err(Failure::Underflow { t });
        }
        let mut h = h_abs * direction;
        let mut t_new = t + h;
        let last = (t_new - t1) * direction >= 0.0;
        if last {
            t_new = t1;
            h = t_new - t;
        }

        for s in 1..STAGES {
            let ys = axpy(&y, h, &k[..s], &A[s][..s]);
            k[s] = f(t + C[s] * h, &ys);
        }
        let y_new = axpy(&y, h, &k[..STAGES], &B);
        let f_new = f(t_new, &y_new);

        let mut scale = [0.0; N];
        for i in 0..N {
            scale[i] = tol.abs + tol.rel * y[i].abs().max(y_new[i].abs());
        }
        let e5 = rms_scaled(&k, &E5, &scale);
        let e3 = rms_scaled(&k, &E3, &scale);
        let err = if e5 == 0.0 && e3 == 0.0 {
            0.0
        } else {
            h.abs() * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
        };

        steps += 1;
        if err < 1.0 {
            let mut factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(ERROR_EXPONENT)).min(MAX_FACTOR)
            };
            if rejected {
                factor = factor.min(1.0);
            }
            rejected = false;
            // Clamped final steps do not shrink the carried proposal.
            if !last || h.abs() >= h_abs {
                h_abs = (h.abs() * factor).min(tol.max_step);
            }
            t = t_new;
            y = y_new;
            k[0] = f_new;
            if observer(t, &y).is_break() {
                *hint = Some(h_abs);
                return Ok(Outcome::Stopped { t, y });
            }
            if last {
                *hint = Some(h_abs);
                return Ok(Outcome::Reached(y));
            }
        } else {
            h_abs = h.abs() * (SAFETY * err.powf(ERROR_EXPONENT)).max(MIN_FACTOR);
            rejected = true;
        }
        if steps >= tol.max_steps {
            return Err(Failure::StepLimit { t, y });
        }
    }
}

/// Classic fixed-step RK4 with `n` equal steps from `t0` to `t1`.
pub(crate) fn rk4<const N: usize, F, O>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    n: usize,
    mut observer: O,
) -> Outcome<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    O: FnMut(f64, &[f64; N]) -> ControlFlow<()>,
{
    let n = n.max(1);
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    for i in 0..n {
        let t = t0 + i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &[k1], &[1.0]));
        let k3 = f(t + 0.5 * h, &axpy(&y, 0.5 * h, &[k2], &[1.0]));
        let k4 = f(t + h, &axpy(&y, h, &[k3], &[1.0]));
        y = axpy(&y, h / 6.0, &[k1, k2, k3, k4], &[1.0, 2.0, 2.0, 1.0]);
        let t_new = if i + 1 == n {
            t1
        } else {
            t0 + (i + 1) as f64 * h
        };
        if observer(t_new, &y).is_break() {
            return Outcome::Stopped { t: t_new, y };
        }
    }
    Outcome::Reached(y)
}
