//! Event-by-event Moran model with immigration and selection.
//!
//! A community of constant size J. Each event one individual, chosen
//! uniformly, dies. With probability `m` the vacancy is filled by an
//! immigrant drawn from the pool `p`; otherwise by the offspring of a resident
//! chosen with probability proportional to `count_k (1 + s_k)`. Both choices
//! are made against the community as it stood before the event.

use std::io::Write;

use rand::Rng;

use crate::env::EnvironmentPath;
use crate::error::{invalid, Error, Result};
use crate::io::fmt_f64;

/// Species counts of a community of size J.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteState {
    counts: Vec<u64>,
    j: u64,
}

impl DiscreteState {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.len() < 2 {
            return Err(invalid("a community needs at least two species slots"));
        }
        let j: u64 = counts.iter().sum();
        if j == 0 {
            return Err(invalid("community size must be positive"));
        }
        Ok(Self { counts, j })
    }

    /// Round the proportions of the first S species to counts; the last
    /// species takes the remainder.
    pub fn from_proportions(x: &[f64], j: u64) -> Result<Self> {
        if j == 0 {
            return Err(invalid("community size must be positive"));
        }
        let mut counts: Vec<u64> = Vec::with_capacity(x.len() + 1);
        for &xi in x {
            if !(0.0..=1.0).contains(&xi) {
                return Err(invalid(format!("proportion {xi} outside [0,1]")));
            }
            counts.push((xi * j as f64).round() as u64);
        }
        let used: u64 = counts.iter().sum();
        if used > j {
            return Err(invalid("proportions sum to more than 1"));
        }
        counts.push(j - used);
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn size(&self) -> u64 {
        self.j
    }

    pub fn n_species(&self) -> usize {
        self.counts.len()
    }

    pub fn proportion(&self, i: usize) -> f64 {
        self.counts[i] as f64 / self.j as f64
    }

    pub fn proportions(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.j as f64).collect()
    }

    pub fn is_monomorphic(&self) -> bool {
        self.counts.iter().any(|&c| c == self.j)
    }
}

/// One-event transition probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProbs {
    /// `up[i]`: species i gains one individual.
    pub up: Vec<f64>,
    /// `down[i]`: species i loses one individual.
    pub down: Vec<f64>,
    /// `pair[i][j]` (i != j): i gains and j loses. Diagonal entries hold the
    /// probability that the replacement is of the same species as the dead.
    pub pair: Vec<Vec<f64>>,
}

/// Per-event (unrescaled) transition probabilities for immigration
/// probability `m`, pool `p` (S+1 entries) and selection `s` (S entries).
pub fn transition_probs(state: &DiscreteState, m: f64, p: &[f64], s: &[f64]) -> Result<TransitionProbs> {
    let n = state.n_species();
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::InvalidScaling(m));
    }
    if p.len() != n || s.len() + 1 != n {
        return Err(invalid("pool and selection lengths do not match the state"));
    }
    let x = state.proportions();
    let denom = 1.0 + x.iter().zip(s).map(|(xi, si)| xi * si).sum::<f64>();
    if denom <= 0.0 {
        return Err(Error::InvalidSelection(denom));
    }
    // probability that the newcomer belongs to species i
    let born: Vec<f64> = (0..n)
        .map(|i| {
            let fit = x[i] * (1.0 + s.get(i).copied().unwrap_or(0.0)) / denom;
            m * p[i] + (1.0 - m) * fit
        })
        .collect();
    let pair: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| x[j] * born[i]).collect()).collect();
    let up = (0..n).map(|i| (1.0 - x[i]) * born[i]).collect();
    let down = (0..n).map(|i| x[i] * (1.0 - born[i])).collect();
    Ok(TransitionProbs { up, down, pair })
}

/// Per-event parameters: immigration probability and selection already divided by J.
#[derive(Debug, Clone, PartialEq)]
pub struct EventParams<'a> {
    pub m: f64,
    pub pool: &'a [f64],
    pub s: &'a [f64],
}

/// Apply one death/birth event in place. Returns `(born, died)` species indices.
pub fn moran_step<R: Rng + ?Sized>(state: &mut DiscreteState, params: &EventParams<'_>, rng: &mut R) -> Result<(usize, usize)> {
    if !(0.0..=1.0).contains(&params.m) {
        return Err(Error::InvalidScaling(params.m));
    }
    let n = state.n_species();
    let j = state.j;
    let weighted: f64 = state.counts.iter().zip(params.s).map(|(&c, &s)| c as f64 * s).sum();
    let total_fitness = j as f64 + weighted;
    if total_fitness <= 0.0 {
        return Err(Error::InvalidSelection(total_fitness / j as f64));
    }

    let dead = pick_count(&state.counts, rng.random_range(0..j));
    let born = if rng.random::<f64>() < params.m {
        pick_weighted(params.pool, rng.random::<f64>())
    } else {
        let mut u = rng.random::<f64>() * total_fitness;
        let mut chosen = n - 1;
        for (k, &c) in state.counts.iter().enumerate() {
            let w = c as f64 * (1.0 + params.s.get(k).copied().unwrap_or(0.0));
            if u < w {
                chosen = k;
                break;
            }
            u -= w;
        }
        // guard against rounding landing on an empty species
        if state.counts[chosen] == 0 {
            chosen = state.counts.iter().rposition(|&c| c > 0).expect("nonempty community");
        }
        chosen
    };
    state.counts[dead] -= 1;
    state.counts[born] += 1;
    Ok((born, dead))
}

fn pick_count(counts: &[u64], mut r: u64) -> usize {
    for (k, &c) in counts.iter().enumerate() {
        if r < c {
            return k;
        }
        r -= c;
    }
    unreachable!("r below the total count")
}

fn pick_weighted(w: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        acc += wk;
        if u < acc {
            return k;
        }
    }
    w.iter().rposition(|&wk| wk > 0.0).unwrap_or(w.len() - 1)
}

/// Recorded states of one Moran run.
#[derive(Debug, Clone, PartialEq)]
pub struct MoranTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<DiscreteState>,
}

impl MoranTrajectory {
    /// Columns `t, species_1 .. species_{S+1}, simpson` (species as counts).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.n_species());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("species_{i}")));
        header.push("simpson".into());
        writeln!(w, "{}", header.join(","))?;
        for (t, st) in self.grid.iter().zip(&self.states) {
            let mut row = vec![fmt_f64(*t)];
            row.extend(st.counts.iter().map(|c| c.to_string()));
            row.push(simpson_discrete(st).map(fmt_f64).unwrap_or_else(|_| "nan".into()));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Number of events in rescaled time `t` for a community of size `j`.
pub fn events_until(t: f64, j: u64) -> u64 {
    (t * (j as f64).powi(2) + 1e-9).floor() as u64
}

/// Event count whose post-event state represents grid time `t`: the nearest
/// event, ties resolved toward the earlier one.
pub fn record_index(t: f64, j: u64) -> u64 {
    let x = t * (j as f64).powi(2);
    (x - 0.5).ceil().max(0.0) as u64
}

/// Run `floor(T J^2)` events. Event `n` uses the environment at `t = n / J^2`
/// divided by J. States are recorded at the nearest event to each grid time.
pub fn simulate_moran<R: Rng + ?Sized>(
    initial: &DiscreteState,
    env: &EnvironmentPath,
    t_end: f64,
    record_grid: &[f64],
    rng: &mut R,
) -> Result<MoranTrajectory> {
    if !(t_end >= 0.0) || t_end > env.horizon() {
        return Err(Error::OutOfRange { t: t_end, horizon: env.horizon() });
    }
    if env.n_species() != initial.n_species() {
        return Err(invalid("environment and state disagree on the number of species"));
    }
    if record_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("record grid must be nondecreasing"));
    }
    if let Some(&bad) = record_grid.iter().find(|&&t| !(0.0..=t_end).contains(&t)) {
        return Err(Error::OutOfRange { t: bad, horizon: t_end });
    }
    let j = initial.size();
    let jf = j as f64;
    let j2 = jf * jf;
    let total = events_until(t_end, j);
    let targets: Vec<u64> = record_grid.iter().map(|&t| record_index(t, j).min(total)).collect();

    let mut state = initial.clone();
    let mut states = Vec::with_capacity(record_grid.len());
    let mut next_rec = 0;
    let mut seg = 0usize;
    let mut seg_end = env.segment_end(0);
    let mut s_event: Vec<f64> = Vec::new();
    let mut m_event = 0.0;
    let load = |seg: usize, s_event: &mut Vec<f64>, m_event: &mut f64| -> Result<()> {
        let segment = &env.segments()[seg];
        *m_event = segment.m / jf;
        if *m_event > 1.0 {
            return Err(Error::InvalidScaling(*m_event));
        }
        s_event.clear();
        s_event.extend(segment.s.iter().map(|v| v / jf));
        Ok(())
    };
    load(0, &mut s_event, &mut m_event)?;

    for n in 0..=total {
        while next_rec < targets.len() && targets[next_rec] == n {
            states.push(state.clone());
            next_rec += 1;
        }
        if n == total {
            break;
        }
        let t = n as f64 / j2;
        if t >= seg_end && seg + 1 < env.segments().len() {
            while seg + 1 < env.segments().len() && t >= env.segment_end(seg) {
                seg += 1;
            }
            seg_end = env.segment_end(seg);
            load(seg, &mut s_event, &mut m_event)?;
        }
        let params = EventParams { m: m_event, pool: env.pool(), s: &s_event };
        moran_step(&mut state, &params, rng)?;
    }
    Ok(MoranTrajectory { grid: record_grid.to_vec(), states })
}

/// Probability that two individuals drawn without replacement are conspecific.
pub fn simpson_discrete(state: &DiscreteState) -> Result<f64> {
    let j = state.size();
    if j < 2 {
        return Err(invalid("the discrete Simpson index needs J >= 2"));
    }
    let same: u128 = state.counts.iter().map(|&c| c as u128 * c.saturating_sub(1) as u128).sum();
    Ok(same as f64 / (j as f64 * (j - 1) as f64))
}
