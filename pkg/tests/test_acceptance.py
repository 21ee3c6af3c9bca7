"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
repeated in the terminal summary. Running the file directly with python
executes the same checks without pytest.
"""

import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE_LINES, box_qp_oracle, equality_qp_oracle, random_instance  # noqa: E402

from svmpool.cli import main as cli_main  # noqa: E402
from svmpool.dataio import SyntheticSpec, synthesize  # noqa: E402
from svmpool.evaluation import EvalConfig, cross_validate, fit_model, predict_model, stratified_folds  # noqa: E402
from svmpool.fusion import FusedKernelConfig, fused_gram  # noqa: E402
from svmpool.joint import JointConfig, bcd_fit  # noqa: E402
from svmpool.kernel import (  # noqa: E402
    HomogeneousMapConfig,
    KernelSpec,
    gram,
    homogeneous_kernel,
    homogeneous_map,
)
from svmpool.ksvm import train_kernel_svm  # noqa: E402
from svmpool.mil_pool import PoolConfig, positive_fraction, svmp_pool  # noqa: E402
from svmpool.svm_core import SolverConfig, augment, kkt_residual, train_linear_svm  # noqa: E402


def verdict(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# 1 ----------------------------------------------------------------------

def test_criterion_1_solver_correctness():
    rng = np.random.default_rng(2024)
    instances = [random_instance(rng, max_n=8, max_p=3) for _ in range(100)]
    worst_lin = worst_ker = worst_kkt = 0.0
    solve_time = 0.0
    for P, N, y, C in instances:
        X = np.vstack([P, N])
        cfg = SolverConfig(C=C)

        t = time.perf_counter()
        h, stats = train_linear_svm(P, N, cfg)
        sol = train_kernel_svm(P, N, KernelSpec("linear"), cfg)
        solve_time += time.perf_counter() - t

        Xa = augment(X)
        _, f_box = box_qp_oracle(Xa @ Xa.T, y, C)
        Q = np.outer(y, y) * (Xa @ Xa.T)
        a = stats.dual_state.alphas
        ours = 0.5 * a @ Q @ a - a.sum()
        worst_lin = max(worst_lin, abs(ours - f_box))

        _, f_eq = equality_qp_oracle(X @ X.T, y, C)
        worst_ker = max(worst_ker, abs(-sol.objective - f_eq))

        worst_kkt = max(worst_kkt, kkt_residual(h, stats.dual_state, P, N, C), sol.kkt_violation)
    ok = worst_lin <= 1e-4 and worst_ker <= 1e-4 and worst_kkt <= 1e-4 and solve_time < 10
    assert verdict(1, "solver correctness", ok,
                   f"max |dual obj - oracle| svm_core={worst_lin:.2e} ksvm={worst_ker:.2e}, "
                   f"max KKT residual={worst_kkt:.2e}, solver time={solve_time:.2f}s")


# 2 ----------------------------------------------------------------------

def _eta_bags():
    # half from the default planted spec, half from a crowded 2-D spec where
    # some bags cannot reach the target before the cap
    easy = synthesize(SyntheticSpec(class_count=4, sequences_per_class=25, seed=7)).sequences
    hard_ds = synthesize(SyntheticSpec(class_count=4, sequences_per_class=25, dimension=2,
                                       signal_strength=0.5, background_strength=1.0,
                                       negative_strength=1.0, noise_sigma=1.0, seed=8))
    easy_ds = synthesize(SyntheticSpec(class_count=4, sequences_per_class=25, seed=7))
    return [(b, easy_ds.negative) for b in easy] + [(b, hard_ds.negative) for b in hard_ds.sequences]


def test_criterion_2_eta_contract():
    pairs = _eta_bags()
    assert len(pairs) == 200
    violations = unsat = unsat_not_cap = 0
    for eta in (0.5, 0.7, 0.9):
        cfg = PoolConfig(eta=eta)
        cap_C = cfg.schedule()[-1]
        for bag, neg in pairs:
            d = svmp_pool(bag, neg, cfg)
            frac = positive_fraction(d.vector, bag)
            if d.satisfied and not frac >= eta:
                violations += 1
            if not d.satisfied:
                unsat += 1
                if d.final_C != cap_C or frac >= eta:
                    unsat_not_cap += 1
    ok = violations == 0 and unsat_not_cap == 0
    assert verdict(2, "eta contract", ok,
                   f"600 pools: {violations} satisfied-but-short, {unsat} unsatisfied, "
                   f"{unsat_not_cap} unsatisfied before the cap")


# 3 ----------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_3_planted_comparison():
    t0 = time.perf_counter()
    rows = []
    held = 0
    for seed in range(5):
        ds = synthesize(SyntheticSpec(class_count=10, sequences_per_class=30, frames_per_sequence=25,
                                      dimension=128, informative_fraction=0.2, seed=seed))
        cfg = EvalConfig(fusion=FusedKernelConfig(beta1=1.0, beta2=1.0))
        acc = {p: cross_validate(ds, p, cfg, folds=3, seed=seed).mean_accuracy
               for p in ("avg", "svmp", "nsvmp", "fused")}
        good = (acc["svmp"] - acc["avg"] >= 0.05
                and acc["fused"] >= max(acc["svmp"], acc["nsvmp"]) - 0.01)
        held += good
        rows.append(f"s{seed}: avg={acc['avg']:.3f} svmp={acc['svmp']:.3f} "
                    f"nsvmp={acc['nsvmp']:.3f} fused={acc['fused']:.3f}")
    elapsed = time.perf_counter() - t0
    ok = held >= 4 and elapsed < 300
    assert verdict(3, "pooling comparison on planted data", ok,
                   f"orderings held on {held}/5 seeds in {elapsed:.0f}s; " + "; ".join(rows))


# 4 ----------------------------------------------------------------------

def test_criterion_4_decoupling_identity():
    ds = synthesize(SyntheticSpec(class_count=3, sequences_per_class=8, seed=3))
    cfg = JointConfig(max_bcd_iters=1)
    descs, _, history = bcd_fit(ds, cfg)
    same = all(np.array_equal(d.vector, svmp_pool(b, ds.negative, cfg.pool).vector)
               and d.vector.tobytes() == svmp_pool(b, ds.negative, cfg.pool).vector.tobytes()
               for d, b in zip(descs, ds.sequences))
    ok = same and len(history) == 1
    assert verdict(4, "decoupling identity", ok,
                   f"{len(descs)} descriptors bit-identical={same}, history length={len(history)}")


# 5 ----------------------------------------------------------------------

def test_criterion_5_fusion_degeneracy():
    ds = synthesize(SyntheticSpec(class_count=5, sequences_per_class=10, seed=11))
    assert len(ds) == 50
    folds = stratified_folds(ds.labels, 3, seed=0)
    lin_cfg = EvalConfig()
    fus_cfg = EvalConfig(fusion=FusedKernelConfig(beta1=1.0, beta2=0.0))
    mismatches = 0
    for f in range(3):
        tr, te = np.flatnonzero(folds != f), np.flatnonzero(folds == f)
        train, test = ds.subset(tr), ds.subset(te)
        a = predict_model(fit_model(train, "svmp", lin_cfg), test)
        b = predict_model(fit_model(train, "fused", fus_cfg), test)
        mismatches += int(np.count_nonzero(np.asarray(a) != np.asarray(b)))
    assert verdict(5, "fusion degeneracy", mismatches == 0,
                   f"{mismatches} differing predictions over 50 held-out sequences")


# 6 ----------------------------------------------------------------------

def test_criterion_6_kernel_math():
    rng = np.random.default_rng(6)
    worst_asym = 0.0
    worst_eig = 0.0
    for _ in range(20):
        X = rng.standard_normal((int(rng.integers(2, 40)), int(rng.integers(1, 20))))
        for spec in (KernelSpec("linear"), KernelSpec("rbf", float(10 ** rng.uniform(-2, 1)))):
            G = gram(spec, X)
            worst_asym = max(worst_asym, float(np.max(np.abs(G.entries - G.entries.T))))
            worst_eig = min(worst_eig, G.min_relative_eigenvalue())
        S = rng.standard_normal((12, 5))
        N = rng.standard_normal((12, 7))
        F = fused_gram(S, N, FusedKernelConfig())
        worst_asym = max(worst_asym, float(np.max(np.abs(F.entries - F.entries.T))))
        worst_eig = min(worst_eig, F.min_relative_eigenvalue())

    cfg = HomogeneousMapConfig("chi2", order=3)
    errs = []
    for _ in range(100):
        x, y = rng.uniform(0, 1, 16), rng.uniform(0, 1, 16)
        exact = homogeneous_kernel("chi2", x, y)
        errs.append(abs(homogeneous_map(cfg, x) @ homogeneous_map(cfg, y) - exact) / exact)
    max_err = max(errs)
    ok = worst_asym <= 1e-10 and worst_eig >= -1e-8 and max_err <= 0.02
    assert verdict(6, "kernel math", ok,
                   f"max asymmetry={worst_asym:.1e}, min relative eigenvalue={worst_eig:.1e}, "
                   f"chi2 order-3 max relative error={max_err:.4f} (mean {np.mean(errs):.4f})")


# 7 ----------------------------------------------------------------------

def _run_twice(tmp, argv_fn):
    outs = []
    for k in (0, 1):
        d = tmp / f"run{k}"
        d.mkdir()
        code = cli_main(argv_fn(d))
        assert code == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())
                     if not p.name.endswith(".timings.json")})
    return outs[0] == outs[1], sorted(outs[0])


def test_criterion_7_cli_determinism(tmp_path):
    data = tmp_path / "data"
    data.mkdir()
    ds_args = ["synth", "--out", str(data / "ds.json"), "--classes", "3", "--per-class", "6",
               "--seed", "5"]
    assert cli_main(ds_args) == 0
    ds = str(data / "ds.json")
    model = str(data / "model.bin")
    assert cli_main(["train", "--data", ds, "--out", model, "--pipeline", "fused"]) == 0
    commands = {
        "synth": lambda d: ["synth", "--out", str(d / "ds.json"), "--classes", "3",
                            "--per-class", "6", "--seed", "5"],
        "pool": lambda d: ["pool", "--data", ds, "--out", str(d / "desc.bin"), "--eta", "0.9"],
        "pool-rbf": lambda d: ["pool", "--data", ds, "--out", str(d / "desc.bin"), "--kernel", "rbf"],
        "train": lambda d: ["train", "--data", ds, "--out", str(d / "m.bin"), "--pipeline", "joint"],
        "eval": lambda d: ["eval", "--data", ds, "--out", str(d / "r.json"), "--pipeline", "fused"],
        "eval-model": lambda d: ["eval", "--data", ds, "--out", str(d / "r.json"), "--model", model],
        "report": lambda d: ["report", "--data", ds, "--out", str(d / "t.json"),
                             "--eta-sweep", "0.5,0.9"],
    }
    results = {}
    for name, fn in commands.items():
        sub = tmp_path / name
        sub.mkdir()
        results[name] = _run_twice(sub, fn)[0]
    ok = all(results.values())
    assert verdict(7, "CLI determinism", ok,
                   ", ".join(f"{k}={'identical' if v else 'DIFFERENT'}" for k, v in results.items()))


# 8 ----------------------------------------------------------------------

def test_criterion_8_performance_envelope():
    timings = {}
    ref = None
    for p in (128, 512, 1024, 2048, 4096):
        ds = synthesize(SyntheticSpec(class_count=1, sequences_per_class=3, dimension=p, seed=p))
        cfg = PoolConfig(eta=0.9)
        svmp_pool(ds.sequences[0], ds.negative, cfg)  # warm the jit cache
        best = np.inf
        for bag in ds.sequences:
            t = time.perf_counter()
            d = svmp_pool(bag, ds.negative, cfg)
            best = min(best, time.perf_counter() - t)
        timings[p] = best
        if p == 4096:
            ref = d
    # worst case for the loop: every frame has a negative twin, so eta=1 is
    # never met and every C value is solved
    ds = synthesize(SyntheticSpec(class_count=1, sequences_per_class=1, dimension=4096, seed=1))
    bag = replace(ds.sequences[0], frames=np.array(ds.negative.frames[:25]), informative=None)
    t = time.perf_counter()
    full = svmp_pool(bag, ds.negative, PoolConfig(eta=1.0))
    worst = time.perf_counter() - t
    ok = timings[4096] < 1.0 and worst < 1.0 and not full.satisfied
    scaling = ", ".join(f"p={p}: {1e3 * s:.1f}ms" for p, s in timings.items())
    assert verdict(8, "performance envelope", ok,
                   f"{scaling}; p=4096 full schedule ({full.solver_calls} solves): {1e3 * worst:.1f}ms; "
                   f"eta met at p=4096: {ref.satisfied}")


if __name__ == "__main__":
    import tempfile

    checks = [test_criterion_1_solver_correctness, test_criterion_2_eta_contract,
              test_criterion_3_planted_comparison, test_criterion_4_decoupling_identity,
              test_criterion_5_fusion_degeneracy, test_criterion_6_kernel_math,
              test_criterion_8_performance_envelope]
    failed = 0
    for check in checks:
        try:
            check()
        except AssertionError:
            failed += 1
    with tempfile.TemporaryDirectory() as tmp:
        try:
            test_criterion_7_cli_determinism(Path(tmp))
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
