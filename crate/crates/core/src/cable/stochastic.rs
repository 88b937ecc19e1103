//! Markov channel populations: 8-state Na (m³h) and 5-state K (n⁴).
//!
//! Populations advance by binomial leaping; when fewer than
//! [`EXACT_FALLBACK_EVENTS`] transitions are expected in a step the exact
//! jump process is used instead.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp};

use super::kinetics::Rates;

pub const EXACT_FALLBACK_EVENTS: f64 = 0.1;

pub const NA_STATES: usize = 8;
pub const K_STATES: usize = 5;
/// Na state `i + 4j` has `i` open m gates and `j` open h gates.
pub const NA_OPEN: usize = 7;
pub const K_OPEN: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Transition {
    from: usize,
    to: usize,
    rate: f64,
}

fn na_transitions(r: &Rates) -> [Transition; 20] {
    let mut out = [Transition { from: 0, to: 0, rate: 0.0 }; 20];
    let mut k = 0;
    for j in 0..2 {
        for i in 0..3 {
            let s = i + 4 * j;
            out[k] = Transition { from: s, to: s + 1, rate: (3 - i) as f64 * r.alpha_m };
            out[k + 1] = Transition { from: s + 1, to: s, rate: (i + 1) as f64 * r.beta_m };
            k += 2;
        }
    }
    for i in 0..4 {
        out[k] = Transition { from: i, to: i + 4, rate: r.alpha_h };
        out[k + 1] = Transition { from: i + 4, to: i, rate: r.beta_h };
        k += 2;
    }
    out
}

fn k_transitions(r: &Rates) -> [Transition; 8] {
    let mut out = [Transition { from: 0, to: 0, rate: 0.0 }; 8];
    for i in 0..4 {
        out[2 * i] = Transition { from: i, to: i + 1, rate: (4 - i) as f64 * r.alpha_n };
        out[2 * i + 1] = Transition { from: i + 1, to: i, rate: (i + 1) as f64 * r.beta_n };
    }
    out
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u32, p: f64) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n as u64, p).expect("valid binomial").sample(rng) as u32
}

/// Split `n` items over `probs` (summing to 1) with sequential binomials.
fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u32, probs: &[f64], out: &mut [u32]) {
    let mut left = n;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out[k] = left;
            break;
        }
        let draw = if mass > 0.0 { binomial(rng, left, (p / mass).min(1.0)) } else { 0 };
        out[k] = draw;
        left -= draw;
        mass -= p;
    }
}

fn advance<R: Rng + ?Sized, const S: usize>(counts: &mut [u32; S], transitions: &[Transition], dt: f64, rng: &mut R) {
    let mut exit = [0.0; S];
    for t in transitions {
        exit[t.from] += t.rate;
    }
    let expected: f64 = counts.iter().zip(&exit).map(|(&n, &l)| n as f64 * l * dt).sum();
    if expected < EXACT_FALLBACK_EVENTS {
        advance_exact(counts, transitions, dt, rng);
        return;
    }

    let start = *counts;
    for s in 0..S {
        if start[s] == 0 || exit[s] <= 0.0 {
            continue;
        }
        let mut leaving = binomial(rng, start[s], -(-exit[s] * dt).exp_m1());
        let mut remaining_rate = exit[s];
        for t in transitions.iter().filter(|t| t.from == s) {
            if leaving == 0 {
                break;
            }
            let moved =
                if t.rate >= remaining_rate { leaving } else { binomial(rng, leaving, t.rate / remaining_rate) };
            counts[s] -= moved;
            counts[t.to] += moved;
            leaving -= moved;
            remaining_rate -= t.rate;
        }
    }
}

fn advance_exact<R: Rng + ?Sized, const S: usize>(
    counts: &mut [u32; S],
    transitions: &[Transition],
    dt: f64,
    rng: &mut R,
) {
    let mut t = 0.0;
    loop {
        let total: f64 = transitions.iter().map(|tr| counts[tr.from] as f64 * tr.rate).sum();
        if total <= 0.0 {
            return;
        }
        t += Exp::new(total).expect("positive rate").sample(rng);
        if t >= dt {
            return;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = None;
        for tr in transitions {
            let a = counts[tr.from] as f64 * tr.rate;
            if a <= 0.0 {
                continue;
            }
            chosen = Some(tr);
            if pick < a {
                break;
            }
            pick -= a;
        }
        let tr = chosen.expect("nonzero propensity");
        counts[tr.from] -= 1;
        counts[tr.to] += 1;
    }
}

/// Channel populations of one compartment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelPopulation {
    pub na: [u32; NA_STATES],
    pub k: [u32; K_STATES],
}

impl ChannelPopulation {
    /// Draw states from the steady-state distribution at the given rates.
    pub fn steady_state<R: Rng + ?Sized>(rates: &Rates, n_na: u32, n_k: u32, rng: &mut R) -> Self {
        let (m, h, n) = (rates.m_inf(), rates.h_inf(), rates.n_inf());
        let choose = |n: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64) };
        let mut p_na = [0.0; NA_STATES];
        for j in 0..2 {
            for i in 0..4 {
                let hp = if j == 1 { h } else { 1.0 - h };
                p_na[i + 4 * j] = choose(3, i) * m.powi(i as i32) * (1.0 - m).powi(3 - i as i32) * hp;
            }
        }
        let mut p_k = [0.0; K_STATES];
        for (i, p) in p_k.iter_mut().enumerate() {
            *p = choose(4, i) * n.powi(i as i32) * (1.0 - n).powi(4 - i as i32);
        }
        let mut pop = Self { na: [0; NA_STATES], k: [0; K_STATES] };
        multinomial(rng, n_na, &p_na, &mut pop.na);
        multinomial(rng, n_k, &p_k, &mut pop.k);
        pop
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rates: &Rates, dt: f64, rng: &mut R) {
        advance(&mut self.na, &na_transitions(rates), dt, rng);
        advance(&mut self.k, &k_transitions(rates), dt, rng);
    }

    pub fn open_na(&self) -> u32 {
        self.na[NA_OPEN]
    }

    pub fn open_k(&self) -> u32 {
        self.k[K_OPEN]
    }

    pub fn total_na(&self) -> u32 {
        self.na.iter().sum()
    }

    pub fn total_k(&self) -> u32 {
        self.k.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn steady_state_open_fraction_matches_gates() {
        let r = Rates::at(-65.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pop = ChannelPopulation::steady_state(&r, 1_000_000, 1_000_000, &mut rng);
        assert_eq!(pop.total_na(), 1_000_000);
        assert_eq!(pop.total_k(), 1_000_000);
        let na = pop.open_na() as f64 / 1e6;
        let k = pop.open_k() as f64 / 1e6;
        assert!((na - r.m_inf().powi(3) * r.h_inf()).abs() < 5e-4);
        assert!((k - r.n_inf().powi(4)).abs() < 2e-3);
    }

    #[test]
    fn counts_are_conserved_and_relax() {
        // start all K channels closed and clamp at -20 mV; the open fraction
        // relaxes toward n_inf^4
        let r = Rates::at(-20.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pop = ChannelPopulation { na: [0, 0, 0, 0, 50_000, 0, 0, 0], k: [50_000, 0, 0, 0, 0] };
        for _ in 0..20_000 {
            pop.step(&r, 1e-3, &mut rng);
            assert_eq!(pop.total_na(), 50_000);
            assert_eq!(pop.total_k(), 50_000);
        }
        let k = pop.open_k() as f64 / 5e4;
        assert!((k - r.n_inf().powi(4)).abs() < 0.02, "{k} vs {}", r.n_inf().powi(4));
    }

    #[test]
    fn exact_fallback_for_small_populations() {
        let r = Rates::at(-65.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pop = ChannelPopulation { na: [1, 0, 0, 0, 1, 0, 0, 0], k: [1, 0, 0, 0, 1] };
        // long horizon: both paths preserve totals and bounds
        for _ in 0..100_000 {
            pop.step(&r, 1e-3, &mut rng);
        }
        assert_eq!(pop.total_na(), 2);
        assert_eq!(pop.total_k(), 2);
    }

    #[test]
    fn same_seed_same_path() {
        let r = Rates::at(-50.0, 1.0);
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pop = ChannelPopulation::steady_state(&Rates::at(-65.0, 1.0), 5000, 2000, &mut rng);
            for _ in 0..1000 {
                pop.step(&r, 1e-3, &mut rng);
            }
            pop
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
