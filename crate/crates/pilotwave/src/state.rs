//! Multi-branch quantum states over a handful of continuous degrees of
//! freedom plus discrete spin labels.
//!
//! A state is a flat sum of product branches: each [`Branch`] carries one
//! complex coefficient, one [`SpatialFactor`] per continuous coordinate and
//! one spin label per spin-carrying subsystem. This covers every wave
//! function used by the interferometry scenarios (1-2 particle branches,
//! optionally tensored with a detector ancilla) without any general tensor
//! machinery.
//!
//! Natural units throughout: packet width `a = 1`, kick speed `u = 1`,
//! times in `a/u`. The mass scale `hbar/m` is carried per degree of freedom
//! by [`QuantumState`] so that a carrier `exp(i k x)` rides at its group
//! velocity.

use num_complex::Complex64;
use thiserror::Error;

/// Fourth root of pi, for the normalized Gaussian prefactor.
const PI_QUARTER_ROOT: f64 = 1.331_335_363_800_389_7;

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("configuration arity mismatch: state has {expected} dofs, config has {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("configuration in null support: every branch weight vanishes")]
    NullSupport,
    #[error("overlap support not defined for unbounded support (non-Rect factor on dof {dof})")]
    UnboundedSupport { dof: usize },
}

/// Discrete spin label attached to one spin slot of a branch.
///
/// `NoSpin` marks a slot whose subsystem carries no spin (or whose spin has
/// been made irrelevant); two `NoSpin` labels are *equal*, not orthogonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
    NoSpin,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
            Spin::NoSpin => Spin::NoSpin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Frozen-shape box of unit norm: `1/sqrt(width)` inside the support,
    /// zero outside. The sharp edges are the model's own idealization.
    Rect,
    /// Spreading Gaussian packet; its complex width parameter at time `t`
    /// is `width^2 + i (t - birth_time) hbar/m` and the prefactor keeps the
    /// norm at exactly one for all times.
    Gauss,
    /// Uniform plane wave on a ring of radius `width`; the coordinate is
    /// the arc angle and the density is `1/(2 pi R)` everywhere.
    RingPlane,
}

/// One normalized spatial factor of a product branch.
///
/// The factor value at coordinate `x` and time `t` is
/// `profile(x - center(t)) * exp(i (carrier * (s - v t / 2) + phase_offset))`
/// where `s` is the arc coordinate (`x` for line dofs, `R x` for ring dofs)
/// and `v = group_velocity` is the speed of `center(t) = center0 + v t`.
/// The `carrier * v / 2 * t` term is the free dispersion phase of a packet
/// whose group velocity satisfies `v = (hbar/m) * carrier`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialFactor {
    pub kind: FactorKind,
    /// Packet center at `t = 0` (angle for ring dofs).
    pub center0: f64,
    /// Group velocity of the center, in coordinate units per time for Rect
    /// and Gauss; for RingPlane this is the *arc* velocity (±omega R).
    pub group_velocity: f64,
    /// Carrier wavenumber along the arc coordinate (signed).
    pub carrier: f64,
    /// Box width for Rect, initial 1/e half-width scale for Gauss, ring
    /// radius for RingPlane.
    pub width: f64,
    /// Time from which Gaussian spreading is counted; unused otherwise.
    pub birth_time: f64,
    /// Extra constant phase.
    pub phase_offset: f64,
}

impl SpatialFactor {
    pub fn rect(center0: f64, group_velocity: f64, carrier: f64, width: f64) -> Self {
        assert!(width > 0.0, "factor width must be positive");
        SpatialFactor {
            kind: FactorKind::Rect,
            center0,
            group_velocity,
            carrier,
            width,
            birth_time: 0.0,
            phase_offset: 0.0,
        }
    }

    pub fn rect_at_rest(center0: f64, width: f64) -> Self {
        Self::rect(center0, 0.0, 0.0, width)
    }

    pub fn gauss(
        center0: f64,
        group_velocity: f64,
        carrier: f64,
        width: f64,
        birth_time: f64,
    ) -> Self {
        assert!(width > 0.0, "factor width must be positive");
        SpatialFactor {
            kind: FactorKind::Gauss,
            center0,
            group_velocity,
            carrier,
            width,
            birth_time,
            phase_offset: 0.0,
        }
    }

    /// Plane wave on a ring: `carrier` is the signed arc wavenumber (±k̃)
    /// and `arc_velocity` the signed speed ±omega R of the rotating phase.
    pub fn ring(radius: f64, carrier: f64, arc_velocity: f64) -> Self {
        assert!(radius > 0.0, "ring radius must be positive");
        SpatialFactor {
            kind: FactorKind::RingPlane,
            center0: 0.0,
            group_velocity: arc_velocity,
            carrier,
            width: radius,
            birth_time: 0.0,
            phase_offset: 0.0,
        }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase_offset = phase;
        self
    }

    /// Arc length per coordinate unit: the ring radius for ring dofs, 1
    /// for line dofs.
    pub fn coordinate_scale(&self) -> f64 {
        match self.kind {
            FactorKind::RingPlane => self.width,
            _ => 1.0,
        }
    }

    pub fn center_at(&self, t: f64) -> f64 {
        match self.kind {
            // center0 is an angle; the arc velocity advances it by v/R per
            // unit time.
            FactorKind::RingPlane => self.center0 + self.group_velocity / self.width * t,
            _ => self.center0 + self.group_velocity * t,
        }
    }

    /// Complex width parameter `w(t) = width^2 + i (t - birth_time) hbar/m`
    /// of a Gaussian factor. Its real part never decreases.
    pub fn complex_width(&self, t: f64, hbar_over_m: f64) -> Complex64 {
        Complex64::new(self.width * self.width, (t - self.birth_time) * hbar_over_m)
    }

    /// Support interval at time `t`, or `None` when unbounded (Gauss) or
    /// covering the whole ring.
    pub fn support(&self, t: f64) -> Option<(f64, f64)> {
        match self.kind {
            FactorKind::Rect => {
                let c = self.center_at(t);
                Some((c - 0.5 * self.width, c + 0.5 * self.width))
            }
            _ => None,
        }
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        match self.kind {
            FactorKind::Rect => (x - self.center_at(t)).abs() <= 0.5 * self.width,
            _ => true,
        }
    }

    /// True when `x` sits on a Rect support edge (to 1e-12 of the width).
    pub fn at_edge(&self, x: f64, t: f64) -> bool {
        match self.kind {
            FactorKind::Rect => {
                let d = (x - self.center_at(t)).abs() - 0.5 * self.width;
                d.abs() <= 1e-12 * self.width
            }
            _ => false,
        }
    }

    /// Plane-wave phase common to all kinds: carrier * (s - v t / 2) plus
    /// the constant offset, with `s` the arc coordinate.
    fn carrier_phase(&self, x: f64, t: f64) -> f64 {
        let s = x * self.coordinate_scale();
        self.carrier * (s - 0.5 * self.group_velocity * t) + self.phase_offset
    }

    /// Factor value at coordinate `x` and time `t`.
    pub fn value(&self, x: f64, t: f64, hbar_over_m: f64) -> Complex64 {
        match self.kind {
            FactorKind::Rect => {
                if !self.contains(x, t) {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::cis(self.carrier_phase(x, t)) / self.width.sqrt()
            }
            FactorKind::Gauss => {
                let xi = x - self.center_at(t);
                let w = self.complex_width(t, hbar_over_m);
                let envelope = (-xi * xi / (2.0 * w)).exp();
                let norm = self.width.sqrt() / (PI_QUARTER_ROOT * w.sqrt());
                norm * envelope * Complex64::cis(self.carrier_phase(x, t))
            }
            FactorKind::RingPlane => {
                let norm = 1.0 / (2.0 * std::f64::consts::PI * self.width).sqrt();
                norm * Complex64::cis(self.carrier_phase(x, t))
            }
        }
    }

    /// Logarithmic derivative `d/dx ln value` with respect to the dof
    /// coordinate (so for ring dofs this is per angle, not per arc length).
    /// Rect factors use the interior value over the whole closed support.
    pub fn log_derivative(&self, x: f64, t: f64, hbar_over_m: f64) -> Complex64 {
        let scale = self.coordinate_scale();
        match self.kind {
            FactorKind::Rect | FactorKind::RingPlane => Complex64::new(0.0, self.carrier * scale),
            FactorKind::Gauss => {
                let xi = x - self.center_at(t);
                let w = self.complex_width(t, hbar_over_m);
                Complex64::new(0.0, self.carrier) - xi / w
            }
        }
    }

    /// Local current velocity of this packet alone, in coordinate units per
    /// time: `(hbar/m) Im(d ln psi / ds) / scale`. For a consistent packet
    /// this is the group velocity plus, for Gauss, the spreading drift.
    pub fn local_current_velocity(&self, x: f64, t: f64, hbar_over_m: f64) -> f64 {
        let scale = self.coordinate_scale();
        hbar_over_m * self.log_derivative(x, t, hbar_over_m).im / (scale * scale)
    }
}

/// One product term of the global superposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub coefficient: Complex64,
    pub factors: Vec<SpatialFactor>,
    pub spins: Vec<Spin>,
    /// Stable identity, preserved by kicks, detector transforms and
    /// pruning; assigned at state construction.
    pub tag: usize,
}

impl Branch {
    pub fn new(coefficient: Complex64, factors: Vec<SpatialFactor>, spins: Vec<Spin>) -> Self {
        Branch {
            coefficient,
            factors,
            spins,
            tag: 0,
        }
    }

    /// Branch amplitude at a configuration: coefficient times the product
    /// of all factor values.
    pub fn value_at(&self, positions: &[f64], t: f64, hbar_over_m: &[f64]) -> Complex64 {
        let mut v = self.coefficient;
        for (i, f) in self.factors.iter().enumerate() {
            if v == Complex64::new(0.0, 0.0) {
                return v;
            }
            v *= f.value(positions[i], t, hbar_over_m[i]);
        }
        v
    }

    pub fn contains(&self, positions: &[f64], t: f64) -> bool {
        self.factors
            .iter()
            .zip(positions)
            .all(|(f, &x)| f.contains(x, t))
    }
}

/// Bohmian positions, one real coordinate per continuous degree of freedom
/// (lengths in units of `a`, angles in radians for ring dofs).
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration(pub Vec<f64>);

impl Configuration {
    pub fn new(positions: Vec<f64>) -> Self {
        Configuration(positions)
    }

    pub fn single(z: f64) -> Self {
        Configuration(vec![z])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with_position(&self, dof: usize, x: f64) -> Self {
        let mut p = self.0.clone();
        p[dof] = x;
        Configuration(p)
    }
}

impl std::ops::Index<usize> for Configuration {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Spinor amplitude: complex value per joint spin label tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplitude {
    /// Sorted by spin tuple for deterministic iteration.
    pub terms: Vec<(Vec<Spin>, Complex64)>,
}

impl Amplitude {
    /// Configuration-space density: sum of squared moduli over spin tuples.
    pub fn density(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn get(&self, spins: &[Spin]) -> Complex64 {
        self.terms
            .iter()
            .find(|(s, _)| s.as_slice() == spins)
            .map(|(_, a)| *a)
            .unwrap_or(Complex64::new(0.0, 0.0))
    }
}

fn spin_key(spins: &[Spin]) -> Vec<u8> {
    spins
        .iter()
        .map(|s| match s {
            Spin::Up => 0u8,
            Spin::Down => 1,
            Spin::NoSpin => 2,
        })
        .collect()
}

/// Group complex values by spin tuple and sum within each group.
fn group_by_spin(parts: Vec<(Vec<Spin>, Complex64)>) -> Vec<(Vec<Spin>, Complex64)> {
    let mut grouped: Vec<(Vec<Spin>, Complex64)> = Vec::new();
    for (spins, v) in parts {
        match grouped.iter_mut().find(|(s, _)| *s == spins) {
            Some((_, acc)) => *acc += v,
            None => grouped.push((spins, v)),
        }
    }
    grouped.sort_by_key(|(s, _)| spin_key(s));
    grouped
}

/// The full, never-collapsing wave function: a list of branches plus the
/// current time and the per-dof mass scale `hbar/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub branches: Vec<Branch>,
    pub time: f64,
    pub hbar_over_m: Vec<f64>,
}

impl QuantumState {
    /// Build a state, assigning stable branch tags `0..n` in order. All
    /// branches must share the dof arity and spin-slot arity.
    pub fn new(branches: Vec<Branch>, time: f64, hbar_over_m: Vec<f64>) -> Self {
        assert!(!branches.is_empty(), "state needs at least one branch");
        let dofs = branches[0].factors.len();
        let slots = branches[0].spins.len();
        assert_eq!(dofs, hbar_over_m.len(), "one mass scale per dof");
        for b in &branches {
            assert_eq!(b.factors.len(), dofs, "branch dof arity mismatch");
            assert_eq!(b.spins.len(), slots, "branch spin arity mismatch");
        }
        let mut branches = branches;
        for (i, b) in branches.iter_mut().enumerate() {
            b.tag = i;
        }
        QuantumState {
            branches,
            time,
            hbar_over_m,
        }
    }

    pub fn dof_count(&self) -> usize {
        self.branches[0].factors.len()
    }

    pub fn spin_slots(&self) -> usize {
        self.branches[0].spins.len()
    }

    /// Bookkeeping shift of the current time; factors are parametric in
    /// time so no data changes.
    pub fn at_time(&self, t: f64) -> Self {
        let mut s = self.clone();
        s.time = t;
        s
    }

    /// Sum of squared branch coefficients. Equals the norm when branch
    /// spin tuples are pairwise orthogonal or spatial supports disjoint.
    pub fn norm_sq(&self) -> f64 {
        self.branches.iter().map(|b| b.coefficient.norm_sqr()).sum()
    }

    fn check_arity(&self, config: &Configuration) -> Result<(), StateError> {
        if config.len() != self.dof_count() {
            return Err(StateError::ArityMismatch {
                expected: self.dof_count(),
                got: config.len(),
            });
        }
        Ok(())
    }

    /// Spinor amplitude at a configuration, grouped by joint spin tuple.
    pub fn evaluate(&self, config: &Configuration) -> Result<Amplitude, StateError> {
        self.evaluate_at(config, self.time)
    }

    pub fn evaluate_at(&self, config: &Configuration, t: f64) -> Result<Amplitude, StateError> {
        self.check_arity(config)?;
        let parts = self
            .branches
            .iter()
            .map(|b| (b.spins.clone(), b.value_at(&config.0, t, &self.hbar_over_m)))
            .collect();
        Ok(Amplitude {
            terms: group_by_spin(parts),
        })
    }

    /// Density `|Psi|^2` at a configuration.
    pub fn density(&self, config: &Configuration) -> Result<f64, StateError> {
        Ok(self.evaluate(config)?.density())
    }

    /// Conditional wave function of dof `dof`: all other positions fixed at
    /// their Bohmian values. Errors when every branch weight vanishes.
    pub fn conditional(
        &self,
        dof: usize,
        config: &Configuration,
    ) -> Result<ConditionalWave, StateError> {
        self.check_arity(config)?;
        let t = self.time;
        let mut terms = Vec::with_capacity(self.branches.len());
        let mut any = false;
        for b in &self.branches {
            let mut weight = b.coefficient;
            for (j, f) in b.factors.iter().enumerate() {
                if j != dof {
                    weight *= f.value(config[j], t, self.hbar_over_m[j]);
                }
            }
            if weight.norm_sqr() > 0.0 {
                any = true;
            }
            terms.push(ConditionalTerm {
                weight,
                factor: b.factors[dof],
                spins: b.spins.clone(),
                tag: b.tag,
            });
        }
        if !any {
            return Err(StateError::NullSupport);
        }
        Ok(ConditionalWave {
            dof,
            time: t,
            hbar_over_m: self.hbar_over_m[dof],
            terms,
        })
    }

    /// Intersection of the Rect supports of every branch on `dof` at the
    /// state's current time; `None` when the supports are disjoint.
    pub fn overlap_support(&self, dof: usize) -> Result<Option<(f64, f64)>, StateError> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for b in &self.branches {
            match b.factors[dof].support(self.time) {
                Some((l, h)) => {
                    lo = lo.max(l);
                    hi = hi.min(h);
                }
                None => return Err(StateError::UnboundedSupport { dof }),
            }
        }
        if lo < hi {
            Ok(Some((lo, hi)))
        } else {
            Ok(None)
        }
    }

    /// Effective collapse: drop branches that are negligible at `config`
    /// *and* whose supports are separated from every surviving branch and
    /// receding under free evolution, then renormalize. With `epsilon = 0`
    /// and Rect factors this is an exact support test.
    ///
    /// Only call once no further external interactions (kicks, detector
    /// transforms) are scheduled; those could bring a pruned branch back.
    pub fn prune_collapsed(
        &self,
        config: &Configuration,
        epsilon: f64,
    ) -> Result<(QuantumState, Vec<usize>), StateError> {
        assert!(epsilon >= 0.0, "epsilon must be nonnegative");
        self.check_arity(config)?;
        let t = self.time;
        let weights: Vec<f64> = self
            .branches
            .iter()
            .map(|b| b.value_at(&config.0, t, &self.hbar_over_m).norm_sqr())
            .collect();
        let max_w = weights.iter().cloned().fold(0.0, f64::max);
        let candidate: Vec<bool> = weights.iter().map(|&w| w <= epsilon * max_w).collect();
        if max_w == 0.0 {
            return Ok((self.clone(), Vec::new()));
        }

        let mut pruned = Vec::new();
        let mut kept = Vec::new();
        for (i, b) in self.branches.iter().enumerate() {
            let removable = candidate[i]
                && self
                    .branches
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !candidate[*j])
                    .all(|(_, s)| self.separated_forever(b, s, t));
            if removable {
                pruned.push(b.tag);
            } else {
                kept.push(b.clone());
            }
        }
        if pruned.is_empty() {
            return Ok((self.clone(), pruned));
        }
        let norm: f64 = kept.iter().map(|b| b.coefficient.norm_sqr()).sum();
        let scale = 1.0 / norm.sqrt();
        for b in &mut kept {
            b.coefficient *= scale;
        }
        let state = QuantumState {
            branches: kept,
            time: t,
            hbar_over_m: self.hbar_over_m.clone(),
        };
        Ok((state, pruned))
    }

    /// True when the supports of `b` and `s` are disjoint on some dof and
    /// strictly receding there, so free evolution keeps them apart. Static
    /// separation does not count: packets at rest (a detector ancilla, for
    /// instance) may be brought back together by a later interaction, so
    /// they are never pruned on that account.
    fn separated_forever(&self, b: &Branch, s: &Branch, t: f64) -> bool {
        b.factors.iter().zip(&s.factors).any(|(fb, fs)| {
            let (db, ds) = (fb.center_at(t), fs.center_at(t));
            let dc = db - ds;
            let dv = fb.group_velocity / fb.coordinate_scale()
                - fs.group_velocity / fs.coordinate_scale();
            let receding = dc * dv > 0.0;
            let min_gap = match (fb.kind, fs.kind) {
                (FactorKind::Rect, FactorKind::Rect) => 0.5 * (fb.width + fs.width),
                (FactorKind::RingPlane, _) | (_, FactorKind::RingPlane) => return false,
                // Gaussian tails: packets count as separated once the
                // centers are 6 widths apart (density overlap < 1e-8).
                _ => 6.0 * fb.width.max(fs.width),
            };
            dc.abs() >= min_gap && receding
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTerm {
    /// Coefficient times the fixed-position factors of the other dofs.
    pub weight: Complex64,
    pub factor: SpatialFactor,
    pub spins: Vec<Spin>,
    pub tag: usize,
}

/// The one-dof effective wave obtained from a state by fixing all other
/// positions at their Bohmian values.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalWave {
    pub dof: usize,
    pub time: f64,
    pub hbar_over_m: f64,
    pub terms: Vec<ConditionalTerm>,
}

impl ConditionalWave {
    pub fn evaluate(&self, x: f64) -> Amplitude {
        let parts = self
            .terms
            .iter()
            .map(|term| {
                (
                    term.spins.clone(),
                    term.weight * term.factor.value(x, self.time, self.hbar_over_m),
                )
            })
            .collect();
        Amplitude {
            terms: group_by_spin(parts),
        }
    }

    /// View the conditional wave as a one-dof state (for velocity readouts
    /// on a detector ancilla, for example). Branch tags are preserved.
    pub fn to_state(&self) -> QuantumState {
        let branches = self
            .terms
            .iter()
            .map(|term| Branch {
                coefficient: term.weight,
                factors: vec![term.factor],
                spins: term.spins.clone(),
                tag: term.tag,
            })
            .collect();
        QuantumState {
            branches,
            time: self.time,
            hbar_over_m: vec![self.hbar_over_m],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Two fully overlapping boxes entangled with orthogonal spins, the
    /// canonical split state at t = 0.
    fn sg_split_state(alpha2: f64, beta2: f64, k: f64) -> QuantumState {
        let u = 1.0;
        QuantumState::new(
            vec![
                Branch::new(
                    c(alpha2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, u, k, 1.0)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(beta2.sqrt(), 0.0),
                    vec![SpatialFactor::rect(0.0, -u, -k, 1.0)],
                    vec![Spin::Down],
                ),
            ],
            0.0,
            vec![u / k],
        )
    }

    #[test]
    fn rect_amplitude_inside_support() {
        let width = 2.0;
        let state = QuantumState::new(
            vec![Branch::new(
                c(1.0, 0.0),
                vec![SpatialFactor::rect_at_rest(0.0, width)],
                vec![Spin::NoSpin],
            )],
            0.0,
            vec![1.0],
        );
        let amp = state.evaluate(&Configuration::single(0.0)).unwrap();
        assert_relative_eq!(amp.terms[0].1.norm(), 1.0 / width.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn rect_amplitude_zero_outside_support() {
        let state = QuantumState::new(
            vec![Branch::new(
                c(1.0, 0.0),
                vec![SpatialFactor::rect_at_rest(0.0, 1.0)],
                vec![Spin::NoSpin],
            )],
            0.0,
            vec![1.0],
        );
        let amp = state.evaluate(&Configuration::single(1.0)).unwrap();
        assert_eq!(amp.density(), 0.0);
    }

    #[test]
    fn orthogonal_spin_density_has_no_cross_term() {
        // alpha^2 = 2/5, beta^2 = 3/5, fully overlapping boxes at z = 0:
        // the density is (2/5 + 3/5)/a = 1/a.
        let state = sg_split_state(0.4, 0.6, 2.0 * std::f64::consts::PI / 0.3);
        let d = state.density(&Configuration::single(0.0)).unwrap();
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_rejects_arity_mismatch() {
        let state = sg_split_state(0.4, 0.6, 1.0);
        let err = state
            .evaluate(&Configuration::new(vec![0.0, 0.0]))
            .unwrap_err();
        assert_eq!(err, StateError::ArityMismatch { expected: 1, got: 2 });
    }

    #[test]
    fn conditional_of_product_state_is_own_factor() {
        // Unentangled two-dof state: the conditional equals the dof's own
        // factor regardless of where the other position sits.
        let f0 = SpatialFactor::rect(0.0, 1.0, 3.0, 1.0);
        let f1 = SpatialFactor::rect_at_rest(5.0, 1.0);
        let state = QuantumState::new(
            vec![Branch::new(c(1.0, 0.0), vec![f0, f1], vec![Spin::Up])],
            0.2,
            vec![1.0, 1.0],
        );
        for other in [4.6, 5.0, 5.4] {
            let cond = state
                .conditional(0, &Configuration::new(vec![0.1, other]))
                .unwrap();
            let a = cond.evaluate(0.3).get(&[Spin::Up]);
            let direct = f0.value(0.3, 0.2, 1.0) * f1.value(other, 0.2, 1.0);
            assert_relative_eq!((a - direct).norm(), 0.0, epsilon = 1e-15);
            assert_eq!(cond.terms.len(), 1);
        }
    }

    #[test]
    fn conditional_detector_pick_single_branch() {
        // Two-dof state where the second dof factors are disjoint boxes
        // (neutron at 0 vs shifted by b); fixing the neutron inside the
        // unshifted box leaves only the first branch with nonzero weight.
        let b_shift = 10.0;
        let state = QuantumState::new(
            vec![
                Branch::new(
                    c(0.4f64.sqrt(), 0.0),
                    vec![
                        SpatialFactor::rect(0.0, -1.0, -2.0, 1.0),
                        SpatialFactor::rect_at_rest(0.0, 1.0),
                    ],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(0.6f64.sqrt(), 0.0),
                    vec![
                        SpatialFactor::rect(0.0, 1.0, 2.0, 1.0),
                        SpatialFactor::rect_at_rest(b_shift, 1.0),
                    ],
                    vec![Spin::Down],
                ),
            ],
            -0.5,
            vec![0.5, 0.5],
        );
        let cond = state
            .conditional(0, &Configuration::new(vec![0.3, 0.1]))
            .unwrap();
        let live: Vec<_> = cond
            .terms
            .iter()
            .filter(|t| t.weight.norm_sqr() > 0.0)
            .collect();
        assert_eq!(live.len(), 1);
        assert_eq!(live[0].spins, vec![Spin::Up]);
        assert_eq!(live[0].factor.group_velocity, -1.0);
    }

    #[test]
    fn conditional_null_support_is_an_error() {
        let state = sg_split_state(0.5, 0.5, 1.0);
        // Both boxes sit on [-1/2, 1/2] at t=0; a two-dof config cannot be
        // built here, so instead evaluate a 2-dof product state with the
        // fixed dof outside every support.
        let f0 = SpatialFactor::rect_at_rest(0.0, 1.0);
        let f1 = SpatialFactor::rect_at_rest(0.0, 1.0);
        let prod = QuantumState::new(
            vec![Branch::new(c(1.0, 0.0), vec![f0, f1], vec![Spin::Up])],
            0.0,
            vec![1.0, 1.0],
        );
        let err = prod
            .conditional(0, &Configuration::new(vec![0.0, 3.0]))
            .unwrap_err();
        assert_eq!(err, StateError::NullSupport);
        drop(state);
    }

    #[test]
    fn overlap_support_intersection() {
        let mk = |t: f64| sg_split_state(0.4, 0.6, 1.0).at_time(t);
        // centers +-ut with ut = 1/4: intersection [-1/4, 1/4]
        let s = mk(0.25);
        assert_eq!(s.overlap_support(0).unwrap(), Some((-0.25, 0.25)));
        // ut = 1/2: packets just separated (touching boundary counts empty)
        assert_eq!(mk(0.5).overlap_support(0).unwrap(), None);
        // ut = 0: full overlap
        assert_eq!(mk(0.0).overlap_support(0).unwrap(), Some((-0.5, 0.5)));
    }

    #[test]
    fn overlap_support_needs_bounded_factors() {
        let state = QuantumState::new(
            vec![Branch::new(
                c(1.0, 0.0),
                vec![SpatialFactor::gauss(0.0, 1.0, 1.0, 1.0, 0.0)],
                vec![Spin::NoSpin],
            )],
            0.0,
            vec![1.0],
        );
        assert_eq!(
            state.overlap_support(0).unwrap_err(),
            StateError::UnboundedSupport { dof: 0 }
        );
    }

    #[test]
    fn prune_exact_support_test_after_capture() {
        // SG state after the catch time: the particle rides the up packet
        // outside the overlap; the down branch is pruned exactly.
        let state = sg_split_state(0.4, 0.6, 1.0).at_time(0.6);
        // up packet on [0.1, 1.1], down packet on [-1.1, -0.1]
        let config = Configuration::single(0.35);
        let (pruned, removed) = state.prune_collapsed(&config, 0.0).unwrap();
        assert_eq!(removed, vec![1]);
        assert_eq!(pruned.branches.len(), 1);
        assert_eq!(pruned.branches[0].spins, vec![Spin::Up]);
        assert_relative_eq!(pruned.norm_sq(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn prune_keeps_overlapping_packets() {
        let state = sg_split_state(0.4, 0.6, 1.0).at_time(0.1);
        let config = Configuration::single(0.0);
        let (kept, removed) = state.prune_collapsed(&config, 0.0).unwrap();
        assert!(removed.is_empty());
        assert_eq!(kept.branches.len(), 2);
    }

    #[test]
    fn prune_keeps_statically_separated_ancilla() {
        // Two branches sharing the particle factor but holding disjoint
        // at-rest ancilla packets (a phase-detector record): the empty one
        // must survive, since a later interaction could re-overlap them.
        let shared = SpatialFactor::rect(0.0, 1.0, 1.0, 1.0);
        let state = QuantumState::new(
            vec![
                Branch::new(
                    c(0.5f64.sqrt(), 0.0),
                    vec![shared, SpatialFactor::rect_at_rest(0.0, 1.0)],
                    vec![Spin::NoSpin],
                ),
                Branch::new(
                    c(-(0.5f64.sqrt()), 0.0),
                    vec![shared, SpatialFactor::rect_at_rest(10.0, 1.0)],
                    vec![Spin::NoSpin],
                ),
            ],
            0.0,
            vec![1.0, 1.0],
        );
        let (kept, removed) = state
            .prune_collapsed(&Configuration::new(vec![0.1, 0.0]), 0.0)
            .unwrap();
        assert!(removed.is_empty());
        assert_eq!(kept.branches.len(), 2);
    }

    #[test]
    fn prune_does_not_drop_approaching_packets() {
        // Disjoint boxes moving toward each other must both survive even
        // though one has zero weight at the configuration.
        let state = QuantumState::new(
            vec![
                Branch::new(
                    c(0.5f64.sqrt(), 0.0),
                    vec![SpatialFactor::rect(-2.0, 1.0, 1.0, 1.0)],
                    vec![Spin::Up],
                ),
                Branch::new(
                    c(0.5f64.sqrt(), 0.0),
                    vec![SpatialFactor::rect(2.0, -1.0, -1.0, 1.0)],
                    vec![Spin::Down],
                ),
            ],
            0.0,
            vec![1.0],
        );
        let (kept, removed) = state
            .prune_collapsed(&Configuration::single(-2.0), 0.0)
            .unwrap();
        assert!(removed.is_empty());
        assert_eq!(kept.branches.len(), 2);
    }

    #[test]
    fn norm_is_time_invariant_for_gaussian_superposition() {
        // Same-spin Gaussian branches interfere, so check the full
        // quadrature, not just the coefficient sum.
        let k = 2.0 * std::f64::consts::PI / 0.3;
        let state = QuantumState::new(
            vec![
                Branch::new(
                    c(0.4f64.sqrt(), 0.0),
                    vec![SpatialFactor::gauss(0.0, -1.0, -k, 1.0, -4.0)],
                    vec![Spin::NoSpin],
                ),
                Branch::new(
                    c(0.6f64.sqrt(), 0.0),
                    vec![SpatialFactor::gauss(0.0, 1.0, k, 1.0, -4.0)],
                    vec![Spin::NoSpin],
                ),
            ],
            0.0,
            vec![1.0 / k],
        );
        for t in [-1.0, 0.0, 0.7, 2.0] {
            let s = state.at_time(t);
            let h = 2e-5;
            let n = (24.0 / h) as usize / 2 * 2;
            let mut sum = 0.0;
            for i in 0..=n {
                let z = -12.0 + i as f64 * h;
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                sum += w * s.density(&Configuration::single(z)).unwrap();
            }
            sum *= h / 3.0;
            assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_consistency_random_draws() {
        // evaluate(conditional(s, i, c), x) == evaluate(s, c with x_i := x)
        // over random states, configurations and probe points.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let spins = [Spin::Up, Spin::Down, Spin::NoSpin];
            let n_branch = rng.gen_range(1..=3);
            let branches: Vec<Branch> = (0..n_branch)
                .map(|_| {
                    let coef = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let factors = vec![
                        SpatialFactor::gauss(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-5.0..5.0),
                            rng.gen_range(0.5..1.5),
                            -2.0,
                        ),
                        SpatialFactor::rect(rng.gen_range(-0.2..0.2), 0.0, 0.0, 4.0),
                    ];
                    Branch::new(coef, factors, vec![spins[rng.gen_range(0..3)]])
                })
                .collect();
            let state = QuantumState::new(branches, rng.gen_range(-1.0..1.0), vec![0.3, 0.3]);
            let config = Configuration::new(vec![rng.gen_range(-0.5..0.5), 0.0]);
            let dof = rng.gen_range(0..2);
            let x = rng.gen_range(-0.4..0.4);
            let cond = state.conditional(dof, &config).unwrap();
            let lhs = cond.evaluate(x);
            let rhs = state.evaluate(&config.with_position(dof, x)).unwrap();
            for (spins, a) in &rhs.terms {
                assert_relative_eq!((lhs.get(spins) - a).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_real_width_never_decreases() {
        let f = SpatialFactor::gauss(0.0, 1.0, 2.0, 1.0, -4.0);
        let mut prev: f64 = 0.0;
        for i in 0..50 {
            let t = -4.0 + i as f64 * 0.3;
            let w = f.complex_width(t, 0.5);
            assert!(w.re >= prev.max(1.0) - 1e-15);
            prev = w.re;
        }
    }

    #[test]
    fn ring_density_is_uniform() {
        let r = 1.0;
        let f = SpatialFactor::ring(r, -10.0, -0.5);
        for theta in [0.0, 1.0, 3.0, 6.0] {
            let v = f.value(theta, 0.3, 0.05);
            assert_relative_eq!(
                v.norm_sqr(),
                1.0 / (2.0 * std::f64::consts::PI * r),
                epsilon = 1e-15
            );
        }
    }
}
