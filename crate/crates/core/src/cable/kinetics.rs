//! Hodgkin–Huxley rate functions (ms⁻¹) with membrane potential in mV,
//! resting near −65 mV.

/// Reference temperature of the rate constants, °C.
pub const REFERENCE_TEMPERATURE_C: f64 = 6.3;
pub const Q10: f64 = 3.0;

pub fn temperature_factor(celsius: f64) -> f64 {
    Q10.powf((celsius - REFERENCE_TEMPERATURE_C) / 10.0)
}

/// `x / (e^x − 1)`, continuous through `x = 0`.
fn exprel_inv(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub alpha_m: f64,
    pub beta_m: f64,
    pub alpha_h: f64,
    pub beta_h: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

impl Rates {
    pub fn at(v: f64, phi: f64) -> Self {
        Self {
            alpha_m: phi * exprel_inv(-(v + 40.0) / 10.0),
            beta_m: phi * 4.0 * (-(v + 65.0) / 18.0).exp(),
            alpha_h: phi * 0.07 * (-(v + 65.0) / 20.0).exp(),
            beta_h: phi / (1.0 + (-(v + 35.0) / 10.0).exp()),
            alpha_n: phi * 0.1 * exprel_inv(-(v + 55.0) / 10.0),
            beta_n: phi * 0.125 * (-(v + 65.0) / 80.0).exp(),
        }
    }

    pub fn m_inf(&self) -> f64 {
        self.alpha_m / (self.alpha_m + self.beta_m)
    }

    pub fn h_inf(&self) -> f64 {
        self.alpha_h / (self.alpha_h + self.beta_h)
    }

    pub fn n_inf(&self) -> f64 {
        self.alpha_n / (self.alpha_n + self.beta_n)
    }

    pub fn tau_m(&self) -> f64 {
        1.0 / (self.alpha_m + self.beta_m)
    }
}

/// Exponential-Euler update of a gate with rates `a`, `b` over `dt`.
#[inline]
pub fn advance_gate(x: f64, a: f64, b: f64, dt: f64) -> f64 {
    let s = a + b;
    let inf = a / s;
    inf + (x - inf) * (-s * dt).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removable_singularities_are_continuous() {
        for v0 in [-40.0, -55.0] {
            let a = Rates::at(v0 - 1e-7, 1.0);
            let b = Rates::at(v0, 1.0);
            let c = Rates::at(v0 + 1e-7, 1.0);
            assert!((a.alpha_m - b.alpha_m).abs() < 1e-6 && (c.alpha_m - b.alpha_m).abs() < 1e-6);
            assert!((a.alpha_n - b.alpha_n).abs() < 1e-6 && (c.alpha_n - b.alpha_n).abs() < 1e-6);
        }
        // limits: alpha_m(-40) = 1, alpha_n(-55) = 0.1
        assert!((Rates::at(-40.0, 1.0).alpha_m - 1.0).abs() < 1e-12);
        assert!((Rates::at(-55.0, 1.0).alpha_n - 0.1).abs() < 1e-12);
    }

    #[test]
    fn classic_resting_values() {
        let r = Rates::at(-65.0, 1.0);
        assert!((r.m_inf() - 0.0529).abs() < 1e-3);
        assert!((r.h_inf() - 0.5961).abs() < 1e-3);
        assert!((r.n_inf() - 0.3177).abs() < 1e-3);
    }

    #[test]
    fn q10_scaling() {
        assert_eq!(temperature_factor(6.3), 1.0);
        assert!((temperature_factor(16.3) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn gate_relaxes_to_steady_state() {
        // at clamped voltage, after 5 τ the gate is within e^-5 of m_inf
        let r = Rates::at(-30.0, 1.0);
        let tau = r.tau_m();
        let dt = 1e-3;
        let steps = (5.0 * tau / dt).ceil() as usize;
        let mut m = 0.0;
        for _ in 0..steps {
            m = advance_gate(m, r.alpha_m, r.beta_m, dt);
        }
        assert!((m - r.m_inf()).abs() / r.m_inf() < 0.01);
    }
}
