//! Closed-form free Gaussian wave packets in one dimension and their
//! superpositions.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quantum_potential::PhysicalConstants;

/// Free packet with initial centre `x0`, width `sigma` (of `|ψ|²`) and wavenumber `k0`:
/// `ψ(x,0) = (2πσ²)^{-1/4} exp(−(x − x0)²/(4σ²) + i k0 x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub x0: f64,
    pub sigma: f64,
    pub k0: f64,
    pub hbar: f64,
    pub mass: f64,
}

impl GaussianPacket {
    pub fn new(x0: f64, sigma: f64, k0: f64, consts: &PhysicalConstants) -> Result<Self> {
        consts.validate()?;
        if !(sigma > 0.0 && sigma.is_finite()) || !x0.is_finite() || !k0.is_finite() {
            return Err(Error::InvalidParameter(format!("packet x0={x0} σ={sigma} k0={k0}")));
        }
        Ok(Self { x0, sigma, k0, hbar: consts.hbar, mass: consts.mass })
    }

    pub fn group_velocity(&self) -> f64 {
        self.hbar * self.k0 / self.mass
    }

    fn tau(&self, t: f64) -> f64 {
        self.hbar * t / (2.0 * self.mass * self.sigma * self.sigma)
    }

    /// `a(t) = 1 + iħt/(2mσ²)`.
    fn spread(&self, t: f64) -> Complex64 {
        Complex64::new(1.0, self.tau(t))
    }

    /// Width of `|ψ(·,t)|²`.
    pub fn width(&self, t: f64) -> f64 {
        self.sigma * (1.0 + self.tau(t).powi(2)).sqrt()
    }

    pub fn center(&self, t: f64) -> f64 {
        self.x0 + self.group_velocity() * t
    }

    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        let a = self.spread(t);
        let xi = x - self.center(t);
        let omega = self.hbar * self.k0 * self.k0 / (2.0 * self.mass);
        let norm = (2.0 * std::f64::consts::PI * self.sigma * self.sigma).powf(-0.25);
        let exponent = -xi * xi / (4.0 * self.sigma * self.sigma * a) + Complex64::i() * (self.k0 * x - omega * t);
        norm * exponent.exp() / a.sqrt()
    }

    /// `∂_xψ / ψ`.
    pub fn log_gradient(&self, x: f64, t: f64) -> Complex64 {
        let xi = x - self.center(t);
        -xi / (2.0 * self.sigma * self.sigma * self.spread(t)) + Complex64::new(0.0, self.k0)
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let w = self.width(t);
        let xi = x - self.center(t);
        (-xi * xi / (2.0 * w * w)).exp() / (w * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Continuous phase `S = ħ arg ψ`.
    pub fn phase(&self, x: f64, t: f64) -> f64 {
        let tau = self.tau(t);
        let xi = x - self.center(t);
        let omega = self.hbar * self.k0 * self.k0 / (2.0 * self.mass);
        self.hbar
            * (self.k0 * x - omega * t + xi * xi * tau / (4.0 * self.sigma * self.sigma * (1.0 + tau * tau))
                - 0.5 * tau.atan())
    }

    /// Guidance velocity `(ħ/m) Im(∂_xψ/ψ)`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        self.hbar / self.mass * self.log_gradient(x, t).im
    }

    /// Position at `t` of the Bohmian path that starts at `x_start`.
    pub fn trajectory(&self, x_start: f64, t: f64) -> f64 {
        self.center(t) + (x_start - self.x0) * (1.0 + self.tau(t).powi(2)).sqrt()
    }
}

/// Normalised equal-weight superposition of packets sharing `σ` and `k0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSuperposition {
    packets: Vec<GaussianPacket>,
    norm: f64,
}

impl PacketSuperposition {
    pub fn new(packets: Vec<GaussianPacket>) -> Result<Self> {
        let first = *packets.first().ok_or_else(|| Error::InvalidParameter("no packets".into()))?;
        if packets.iter().any(|p| p.sigma != first.sigma || p.k0 != first.k0) {
            return Err(Error::InvalidParameter("superposed packets must share σ and k0".into()));
        }
        // ⟨ψ_a|ψ_b⟩ = exp(−(x_a − x_b)²/(8σ²)) for equal σ and k0, at every t.
        let s2 = first.sigma * first.sigma;
        let mut total = 0.0;
        for a in &packets {
            for b in &packets {
                total += (-(a.x0 - b.x0).powi(2) / (8.0 * s2)).exp();
            }
        }
        Ok(Self { packets, norm: total.sqrt() })
    }

    pub fn packets(&self) -> &[GaussianPacket] {
        &self.packets
    }

    pub fn psi(&self, x: f64, t: f64) -> Complex64 {
        self.packets.iter().map(|p| p.psi(x, t)).sum::<Complex64>() / self.norm
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        self.psi(x, t).norm_sqr()
    }

    /// `(ħ/m) Im(ψ̄ ∂_xψ)/|ψ|²`; zero where `ψ` vanishes.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi = Complex64::new(0.0, 0.0);
        for p in &self.packets {
            let v = p.psi(x, t);
            psi += v;
            dpsi += v * p.log_gradient(x, t);
        }
        let rho = psi.norm_sqr();
        if rho == 0.0 {
            return 0.0;
        }
        let first = &self.packets[0];
        first.hbar / first.mass * (psi.conj() * dpsi).im / rho
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schrodinger_residual(p: &GaussianPacket, x: f64, t: f64) -> f64 {
        let (h, dt) = (1e-3, 1e-4);
        let psi_t = (p.psi(x, t + dt) - p.psi(x, t - dt)) / (2.0 * dt);
        let psi_xx = (p.psi(x + h, t) - 2.0 * p.psi(x, t) + p.psi(x - h, t)) / (h * h);
        let lhs = Complex64::i() * p.hbar * psi_t;
        let rhs = -p.hbar * p.hbar / (2.0 * p.mass) * psi_xx;
        (lhs - rhs).norm()
    }

    #[test]
    fn packet_solves_free_schrodinger() {
        let consts = PhysicalConstants::new(0.7, 1.3, 1.0, 1.0).unwrap();
        let p = GaussianPacket::new(0.4, 0.8, 1.1, &consts).unwrap();
        for &(x, t) in &[(0.0, 0.0), (0.5, 0.3), (-1.2, 1.5), (2.0, 0.8)] {
            assert!(schrodinger_residual(&p, x, t) < 1e-5, "at ({x},{t})");
        }
    }

    #[test]
    fn density_matches_psi_and_is_normalised() {
        let p = GaussianPacket::new(-0.5, 0.6, 2.0, &PhysicalConstants::default()).unwrap();
        let t = 0.9;
        let h = 1e-3;
        let mut total = 0.0;
        for i in 0..=20_000 {
            let x = -10.0 + i as f64 * h;
            assert!((p.psi(x, t).norm_sqr() - p.density(x, t)).abs() < 1e-12);
            total += p.density(x, t) * h;
        }
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn phase_gradient_matches_velocity() {
        let consts = PhysicalConstants::new(1.0, 2.0, 1.0, 1.0).unwrap();
        let p = GaussianPacket::new(0.2, 0.5, -0.7, &consts).unwrap();
        let (x, t, h) = (0.9, 0.6, 1e-5);
        let grad = (p.phase(x + h, t) - p.phase(x - h, t)) / (2.0 * h);
        assert!((grad / consts.mass - p.velocity(x, t)).abs() < 1e-8);
        // S = ħ arg ψ modulo 2π
        let arg = p.psi(x, t).arg() * consts.hbar;
        let d = (p.phase(x, t) - arg) / (2.0 * std::f64::consts::PI * consts.hbar);
        assert!((d - d.round()).abs() < 1e-10);
    }

    #[test]
    fn superposition_is_normalised() {
        let consts = PhysicalConstants::default();
        let a = GaussianPacket::new(-1.0, 0.7, 0.0, &consts).unwrap();
        let b = GaussianPacket::new(1.0, 0.7, 0.0, &consts).unwrap();
        let sup = PacketSuperposition::new(vec![a, b]).unwrap();
        for t in [0.0, 1.0] {
            let h = 1e-3;
            let total: f64 = (0..=30_000).map(|i| sup.density(-15.0 + i as f64 * h, t) * h).sum();
            assert!((total - 1.0).abs() < 1e-6, "t={t}: {total}");
        }
        assert!(sup.velocity(0.0, 0.5).abs() < 1e-14);
        let c = GaussianPacket::new(1.0, 0.5, 0.0, &consts).unwrap();
        assert!(PacketSuperposition::new(vec![a, c]).is_err());
    }
}
