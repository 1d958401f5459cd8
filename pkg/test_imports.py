"""
JETHIGGS REPOSITORY TEST
Tests if all Python modules can be imported and the main types built
"""

import sys
import os
import importlib

# Add current directory to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

MODULES = [
    "core.errors",
    "core.config",
    "core.exact_kernel",
    "core.surface_geom",
    "core.higgs_field",
    "core.normal_form",
    "core.spectral",
    "core.poisson_dynamics",
    "core.scene",
    "core.cli",
]


def test_modules_import():
    for name in MODULES:
        importlib.import_module(name)


def test_core_types():
    from core.higgs_field import HiggsField
    from core.poisson_dynamics import PhasePoint, PhaseSpace, hamiltonians
    from core.spectral import spectral_curve
    from core.surface_geom import LineBundleCocycle, build_torsor, torsor_class

    psi = HiggsField.from_rows([["1/x", "1"], ["1", "0"]], poles=[0])
    assert psi.validate().valid
    assert str(spectral_curve(psi).P) == "x*eta^2 - eta - x"
    assert torsor_class(build_torsor(LineBundleCocycle.of_degree(2))) == 2
    pt = PhasePoint.from_field(psi)
    assert hamiltonians(PhaseSpace.for_point(pt)).matches_curve(pt)


def test_scene_corpus():
    from core.scene import load_scene

    scene_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data", "scenes")
    for filename in sorted(os.listdir(scene_dir)):
        if filename.endswith(".json"):
            load_scene(os.path.join(scene_dir, filename))


if __name__ == "__main__":
    print("\n" + "=" * 60)
    print("JETHIGGS PYTHON IMPORT TEST")
    print("=" * 60 + "\n")

    errors = []
    successes = []

    print("[TEST 1] Importing Core Modules...")
    for name in MODULES:
        try:
            importlib.import_module(name)
            print(f"  ✓ {name}")
            successes.append(name)
        except Exception as e:
            print(f"  ✗ {name} - {e}")
            errors.append((name, str(e)))

    print("\n[TEST 2] Building Core Types...")
    for check in (test_core_types, test_scene_corpus):
        try:
            check()
            print(f"  ✓ {check.__name__}")
            successes.append(check.__name__)
        except Exception as e:
            print(f"  ✗ {check.__name__} - {e}")
            errors.append((check.__name__, str(e)))

    print("\n" + "=" * 60)
    if len(errors) == 0:
        print("✅ ALL TESTS PASSED!")
        print(f"\nSuccesses: {len(successes)}")
    else:
        print(f"✗ {len(errors)} ERROR(S) FOUND!")
        print(f"\nSuccesses: {len(successes)}")
        print(f"Errors: {len(errors)}")
        print("\nError Details:")
        for module, error in errors:
            print(f"  - {module}: {error}")
    print("=" * 60 + "\n")
    sys.exit(1 if errors else 0)
