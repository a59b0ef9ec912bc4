use super::{BigRat, GaussianRat};

/// All `z ∈ Q[i]` with `z² = w`: empty, `{0}`, or a pair `{r, −r}`.
pub fn sqrt_in_qi(w: &GaussianRat) -> Vec<GaussianRat> {
    if w.is_zero() {
        return vec![GaussianRat::zero()];
    }
    let Some(n) = w.norm_sq().sqrt() else {
        return Vec::new();
    };
    let half = BigRat::new(1, 2);
    let Some(x) = ((&w.re + &n) * &half).sqrt() else {
        return Vec::new();
    };
    let y = if x.is_zero() {
        match ((&n - &w.re) * &half).sqrt() {
            Some(y) => y,
            None => return Vec::new(),
        }
    } else {
        &w.im / &(&x * &BigRat::from(2))
    };
    let z = GaussianRat::new(x, y);
    if &z * &z != *w {
        return Vec::new();
    }
    vec![z.clone(), -z]
}

/// Solutions of `z⁴ = w` in Q[i]: empty, `{0}`, or `{ρ, −ρ, iρ, −iρ}`.
fn fourth_roots(w: &GaussianRat) -> Vec<GaussianRat> {
    if w.is_zero() {
        return vec![GaussianRat::zero()];
    }
    for s in sqrt_in_qi(w) {
        if let Some(rho) = sqrt_in_qi(&s).into_iter().next() {
            return unit_orbit(&rho);
        }
    }
    Vec::new()
}

fn unit_orbit(rho: &GaussianRat) -> Vec<GaussianRat> {
    let irho = rho.mul_i();
    vec![rho.clone(), -rho, irho.clone(), -irho]
}

/// All `z ∈ Q[i]` with `z^(2^j) = w`.
///
/// The exponent is peeled off four at a time. Since the only roots of unity
/// in Q[i] are `±1, ±i`, at most one fourth root of the current target
/// can lead to a solution, so a single live branch suffices until the final
/// step, whose full root set is returned.
pub fn pow2root_in_qi(w: &GaussianRat, j: u32) -> Vec<GaussianRat> {
    if w.is_zero() {
        return vec![GaussianRat::zero()];
    }
    match j {
        0 => return vec![w.clone()],
        1 => return sqrt_in_qi(w),
        2 => return fourth_roots(w),
        _ => {}
    }
    let mut target = w.clone();
    let mut remaining = j;
    while remaining > 2 {
        let rest = remaining - 2;
        // For rest >= 2 at most one fourth root of the target has a further
        // fourth root (otherwise an 8th root of unity would lie in Q[i]). For
        // rest == 1 both ±z1 may have square roots and either one will do.
        let next = fourth_roots(&target).into_iter().find(|z1| {
            if rest == 1 {
                !sqrt_in_qi(z1).is_empty()
            } else {
                !fourth_roots(z1).is_empty()
            }
        });
        match next {
            Some(z1) => target = z1,
            None => return Vec::new(),
        }
        remaining = rest;
    }
    // Here `remaining` is 1 or 2; any single root generates the full orbit.
    let last = if remaining == 2 {
        fourth_roots(&target)
    } else {
        sqrt_in_qi(&target)
    };
    match last.first() {
        Some(rho) => unit_orbit(rho),
        None => Vec::new(),
    }
}
