"""Print how the discrete bath converges to the continuum as N_B doubles."""
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.phase_engine.bath import SpectralModel, SystemParams, critical_coupling, discretize, self_energy_real  # noqa: E402
from src.phase_engine.oracle import ground_state  # noqa: E402
from src.phase_engine.transition import find_bound_state  # noqa: E402

SIZES = (64, 128, 256, 512, 1024)
ORACLE_SIZES = (256, 1024, 4096)


def generate_convergence_report():
    """Sum of C_i^2, D(e) and the bound-state energy against their continuum values."""
    try:
        params = SystemParams()
        unit = SpectralModel(eta=1.0, s=1.0, omega_c=10.0)
        model = unit.with_eta(2.0 * critical_coupling(unit, params))

        print("📐 Bath Discretization Convergence Report")
        print("=" * 50)
        print(f"Ohmic exponential bath, w_c = {model.omega_c}, eta = 2 eta_c = {model.eta:.6f}")
        print()

        total = model.eta * model.omega_c**2 / (2.0 * np.pi)
        d_exact = self_energy_real(model, -0.5)
        print("N_B      sum C^2 error   D(-0.5) error (midpoint)")
        for n_modes in SIZES:
            gauss = discretize(model, n_modes)
            midpoint = discretize(model, n_modes, scheme="midpoint")
            weight_error = abs(gauss.total_weight - total) / total
            d_error = abs(self_energy_real(midpoint, -0.5) - d_exact) / d_exact
            print(f"{n_modes:<8d} {weight_error:<15.3e} {d_error:.3e}")

        e1 = find_bound_state(model, params)
        print(f"\n🎯 Continuum bound state: e1 = {e1:.10f}")
        print("N_B      eig(H_1) - e1   c0^2 (lowest state)")
        for n_modes in ORACLE_SIZES:
            energy, weight = ground_state(
                discretize(model, n_modes, omega_max_factor=10.0, scheme="midpoint"),
                params,
            )
            print(f"{n_modes:<8d} {energy - e1:<15.3e} {weight:.6f}")

        print("\n✅ Report generated successfully!")

    except Exception as e:
        print(f"❌ Error generating convergence report: {e}")


if __name__ == "__main__":
    generate_convergence_report()
