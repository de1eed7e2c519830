#!/usr/bin/env python3
"""
LAA Identification Demo Script
==============================

Walks through one attack end to end: simulate, measure, identify with SR,
PINN and UKF, and compare the estimates.
"""

import logging
import sys
from dataclasses import replace
from datetime import datetime

from laa_ident.dynamics import detect_breach, integrate, validate_budget
from laa_ident.pinn import PinnSettings, identify_pinn
from laa_ident.pmu import measure
from laa_ident.scenarios import get_scenario
from laa_ident.sparse_regression import LassoSettings, identify_all
from laa_ident.ukf import UkfSettings, run_ukf


def demo_simulation(scenario):
    """Simulate the attack and report the breach"""
    print("⚡ Attack Simulation Demo")
    print("=" * 50)
    model = scenario.load_model()
    attack = scenario.attack(model)
    print(f"   Case: {model.name} ({model.n_buses} buses, parameter set {model.parameter_set})")
    for victim, sensing, k in attack.nonzero_entries():
        print(f"   Attack: K[{victim},{sensing}] = {k:g}, eps[{victim}] = {attack.static_step[model.load_position(victim)]:g}")

    traj = integrate(model, attack, scenario.sim_span)
    breach = detect_breach(traj)
    if breach.breached:
        print(f"✅ Frequency limit ({breach.limit_hz:g} Hz) breached at t = {breach.time:.2f} s, bus {breach.bus}")
    else:
        print(f"   No breach within {scenario.window[1]:g} s (peak {breach.peak_hz:.3f} Hz)")
    if model.has_vulnerable_load:
        print(f"   Budget check passed: {validate_budget(model, attack).passed}")
    return model, attack, traj


def demo_identification(scenario, model, attack, traj, pinn_evals):
    """Identify the attack with every estimator on one noisy measurement set"""
    print("\n🔍 Identification Demo")
    print("=" * 50)
    ms = measure(traj, scenario.rate_hz, scenario.window, scenario.noise, scenario.sigma, seed=scenario.seed_base)
    print(f"   {ms.n_slots} PMU frames at {ms.rate_hz:g} fps, {scenario.noise.value} noise sigma = {scenario.sigma:g}")

    results = {}
    sr = identify_all(model, ms, attack.sensing_buses, LassoSettings())
    sr.score(attack)
    results["SR"] = sr

    pinn, report = identify_pinn(model, ms, attack.sensing_buses, PinnSettings(max_evals=pinn_evals), truth=attack)
    results["PINN"] = pinn
    print(f"   PINN training: {report.status.value}, loss {report.initial_loss:.3g} -> {report.final_loss:.3g}")

    ukf, _ = run_ukf(model, ms, attack.sensing_buses, replace(UkfSettings(), mode="row"), truth=attack)
    results["UKF"] = ukf

    print(f"\n📊 {'Estimator':<10} {'eta2':>10} {'time (s)':>10}   attacked entries")
    print("-" * 65)
    for name, res in results.items():
        entries = ", ".join(f"K[{v},{s}]={k:.2f}" for v, s, k in res.attacked_entries()) or "none"
        print(f"   {name:<10} {res.eta2:>10.3f} {res.duration_s:>10.2f}   {entries}")
    return results


def main():
    """Run the demo on the fast single-point scenario"""
    logging.basicConfig(level=logging.WARNING)
    print("🛡️  LAA Identification Demo")
    print("=" * 60)
    print(f"📅 Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    print()

    pinn_evals = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    scenario = get_scenario("ieee39-fast-single")
    try:
        model, attack, traj = demo_simulation(scenario)
        demo_identification(scenario, model, attack, traj, pinn_evals)
        print("\n" + "=" * 60)
        print("🎉 Demo completed successfully!")
    except Exception as e:
        print(f"\n❌ Demo failed with error: {str(e)}")
        import traceback
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
