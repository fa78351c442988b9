"""Acceptance criteria 1-13, one test each.

Every test prints a ``PASS [k]`` or ``FAIL [k]`` line with the measured
numbers; the lines are also collected into the terminal summary.
"""

import json
import math
import statistics
import time

import numpy as np

from acceptance_log import LINES
from npplab import experiments
from npplab.core import EnergyLevel, inner
from npplab.instances import resampled_pair, sample_instance
from npplab.landscape import ball_count, eta_for, small_ball_bound
from npplab.lowdeg import (
    JuntaAlgorithm,
    eval_junta,
    randomized_distribution,
    resampling_distribution,
    stability_report,
    total_variation,
)
from npplab.rng import derive_seed, stream
from npplab.solvers import (
    InteriorPoint,
    brute_force,
    count_solutions_mitm,
    enumerate_solutions,
    greedy_adjacent,
    karmarkar_karp,
    local_improve,
)


def report(k: int, title: str, ok: bool, detail: str, started: float) -> None:
    line = f"{'PASS' if ok else 'FAIL'} [{k}] {title}: {detail} ({time.perf_counter() - started:.1f}s)"
    LINES.append(line)
    print(line)
    assert ok, line


def run_experiment(tmp_path, name, cfg, workers=1):
    out = tmp_path / name
    res = experiments.run(cfg, out, workers=workers)
    return res["summary"], out


def test_c01_oracle_equivalence():
    t0 = time.perf_counter()
    B = 64
    mismatches = []
    checks = 0
    for n in (12, 16, 20):
        for s in range(200):
            g = sample_instance(n, "gaussian", B, derive_seed(1, n, s))
            opt = brute_force(g)
            # a level whose threshold admits the optimum, plus two fixed ones
            e_opt = min(int(math.floor(opt.energy)), B - 10)
            for e in sorted({e_opt, n // 2, 4}):
                lvl = EnergyLevel(e)
                listed = enumerate_solutions(g, lvl, cap=1 << 20)
                assert not listed.truncated
                counted = count_solutions_mitm(g, lvl)
                checks += 1
                if counted != 2 * len(listed):
                    mismatches.append((n, s, e, "count"))
                if e == e_opt and min(abs(inner(g, x)) for x in listed) != opt.disc_q:
                    mismatches.append((n, s, e, "disc"))
    report(1, "oracle equivalence", not mismatches,
           f"{checks} (instance, level) checks over n in {{12,16,20}} x 200, mismatches={len(mismatches)}", t0)


def test_c02_optimum_scaling(tmp_path):
    t0 = time.perf_counter()
    cfg = {"experiment": "scaling", "n": [16, 20, 24, 28], "scale_bits": 96, "trials": 200, "seed": 2,
           "solver": "bf"}
    summary, _ = run_experiment(tmp_path, "scaling", cfg)
    slope = summary["slope_log2_disc_vs_n"]
    meds = {n: round(-e, 2) for n, e in summary["median_energy"].items()}
    report(2, "optimum scaling", -1.15 <= slope <= -0.85,
           f"slope={slope:.4f} in [-1.15, -0.85]; median log2 disc by n={meds}", t0)


def test_c03_algorithm_hierarchy():
    t0 = time.perf_counter()
    ns = (64, 256, 1024)
    kk, gr = {}, {}
    for n in ns:
        ek, eg = [], []
        for s in range(200):
            g = sample_instance(n, "gaussian", 192, derive_seed(3, n, s))
            ek.append(karmarkar_karp(g).energy)
            eg.append(greedy_adjacent(g).energy)
        kk[n], gr[n] = statistics.median(ek), statistics.median(eg)
    better = all(kk[n] > gr[n] for n in ns)  # higher energy = smaller disc
    d1, d2 = kk[256] - kk[64], kk[1024] - kk[256]
    ratio = d2 / d1
    report(3, "algorithm hierarchy", better and ratio > 1,
           f"median log2(1/disc) KK={ {n: round(kk[n], 2) for n in ns} } greedy={ {n: round(gr[n], 2) for n in ns} }; "
           f"KK increment ratio={ratio:.3f}", t0)


def test_c04_stability_grid():
    t0 = time.perf_counter()
    n = 64
    bad = []
    worst = -math.inf
    for d in (1, 2, 4, 8):
        for eps in (0.05, 0.2, 0.5):
            rep = stability_report(JuntaAlgorithm.sliding(n, d), eps, "resampled", 100_000, seed=derive_seed(4, d))
            target = n * (1 - eps) ** d
            z = abs(rep.mean_inner.mean - target) / rep.mean_inner.sigma
            worst = max(worst, z)
            bound = 2 * d * eps * n
            if z > 4 or rep.mean_sq_dist.mean > bound + 4 * rep.mean_sq_dist.sigma:
                bad.append((d, eps, round(z, 2), rep.mean_sq_dist.mean, bound))
    report(4, "stability", not bad, f"12 (D, eps) cells x 1e5 trials, max |z| inner={worst:.2f}, violations={bad}", t0)


def test_c05_resample_equality():
    t0 = time.perf_counter()
    m = 100_000
    same = 0
    for t in range(m):
        g = sample_instance(10, "gaussian", 32, derive_seed(5, t, "g"))
        same += not resampled_pair(g, 0.1, derive_seed(5, t, "pair")).differ
    p = 0.9**10
    sigma = math.sqrt(p * (1 - p) / m)
    z = (same / m - p) / sigma
    report(5, "resample equality law", abs(z) <= 4, f"P(g = g')={same / m:.5f} vs 0.9^10={p:.5f}, z={z:.2f}", t0)


def test_c06_small_ball():
    t0 = time.perf_counter()
    m = 1_000_000
    worst = -math.inf
    bad = []
    for var in (0.25, 1.0, 4.0):
        z = stream(6, "smallball", var).standard_normal(m) * math.sqrt(var)
        for shift in (0.0, 0.3):
            a = np.abs(z + shift * math.sqrt(var))
            for e in range(1, 11):
                b = small_ball_bound(e, var)
                freq = float(np.mean(a <= 2.0**-e))
                sd = math.sqrt(min(b, 1.0) * max(1 - b, 0.0) / m) if b < 1 else 0.0
                worst = max(worst, (freq - b) / (sd or 1.0))
                if freq > b + 4 * sd:
                    bad.append((e, var, shift, freq, b))
    report(6, "small-ball bound", not bad,
           f"60 (E, sigma^2, mean) cells x 1e6, max (freq - bound)/sigma={worst:.1f}, violations={bad}", t0)


def test_c07_ball_bound():
    t0 = time.perf_counter()
    bad = []
    cells = 0
    for n in range(1, 31):
        for k in range(0, n // 2 + 1):
            cells += 1
            exact = ball_count(n, k).exact
            # 2**(n h(k/n)) = n**n / (k**k (n-k)**(n-k)), compared in integers
            if exact * k**k * (n - k) ** (n - k) > n**n:
                bad.append((n, k))
    report(7, "ball bound", not bad, f"{cells} (n, k) cells checked exactly, violations={bad}", t0)


def test_c08_eta_certificate():
    t0 = time.perf_counter()
    ns = sorted({round(10 ** (j / 8)) for j in range(0, 49)})
    cells = 0
    worst = 0.0
    for n in ns:
        es = sorted({max(1, min(n, round(n ** (j / 8)))) for j in range(0, 9)} | {1, n})
        for e in es:
            eta = eta_for(e, n)
            lhs, rhs = 2 * eta * math.log2(1 / eta), e / (4 * n)
            assert lhs < rhs
            worst = max(worst, lhs / rhs)
            cells += 1
    report(8, "eta certificate", True, f"{cells} (E, n) cells up to n=1e6, max lhs/rhs={worst:.4f}", t0)


def test_c09_rounding_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    vecs = [rng.uniform(-1.4, 1.4, 8) for _ in range(16)]
    vecs += [np.zeros(8), np.array([1, -1, 1, -1, 1, -1, 1, -1.0]), np.array([0, 0.5, -0.5, 1, -1, 2, -2, 0.25]),
             np.linspace(-1, 1, 8)]
    tvs = [total_variation(randomized_distribution(y), resampling_distribution(y)) for y in vecs]
    report(9, "rounding equivalence", len(vecs) == 20 and max(tvs) <= 1e-12,
           f"20 vectors at n=8, max TV={max(tvs):.2e}", t0)


def test_c10_solutions_repel(tmp_path):
    t0 = time.perf_counter()
    freq, hi, consts = {}, {}, {}
    for e in (8, 12, 16, 20):
        cfg = {"experiment": "repel", "n": 26, "scale_bits": 64, "energy": e, "k": 2, "trials": 500, "seed": 10}
        s, _ = run_experiment(tmp_path, f"repel{e}", cfg)
        freq[e] = s["p_pair_within_k"]["point"]
        hi[e] = s["p_pair_within_k"]["hi"]
        consts[e] = s["implied_c"]
    es = sorted(freq)
    mono = all(freq[a] >= freq[b] for a, b in zip(es, es[1:]))
    finite = [c for c in consts.values() if isinstance(c, float) and math.isfinite(c)]
    c = max(finite) if finite else math.inf
    ok = mono and math.isfinite(c) and hi[20] < 0.05
    report(10, "solutions repel", ok,
           f"freq by E={freq}; measured c={c:.3f} (per E {consts}); Wilson hi at E=20={hi[20]:.4f}", t0)


def test_c11_conditional_obstruction(tmp_path):
    t0 = time.perf_counter()
    rows = {}
    for e in (8, 12, 14, 16):
        cfg = {"experiment": "obstruction", "n": 24, "scale_bits": 64, "energy": e, "eps": 0.25, "eta": "auto",
               "mode": "resampled", "solver": "bf", "trials": 2000, "seed": 11}
        s, _ = run_experiment(tmp_path, f"obs{e}", cfg)
        est = s["p_not_cond_given_diff"]
        rows[e] = (est["point"], est["hi"], s["implied_constant"], s["implied_constant_hi"], s["ball_flips"])
    es = (8, 12, 16)
    mono = all(rows[a][0] >= rows[b][0] for a, b in zip(es, es[1:]))

    def c_of(v):
        return -math.inf if v == "-inf" else v

    ok = mono and all(c_of(rows[e][2]) <= 6 for e in (8, 12, 14, 16))
    detail = "; ".join(
        f"E={e}: p={p:.5f} hi={h:.5f} c={c_of(c):.2f} c_hi={c_of(ch):.2f} flips={f}"
        for e, (p, h, c, ch, f) in rows.items()
    )
    report(11, "conditional obstruction", ok, detail, t0)


def _wrapper(A, g, r):
    y = eval_junta(A, g)
    res = local_improve(g, y, r)
    return res.z if isinstance(res, InteriorPoint) else res.x.to_array().astype(float)


def test_c12_local_improvement_wrapper():
    t0 = time.perf_counter()
    n, m = 32, 10_000
    out = []
    ok = True
    for family, scale in (("sign_product", 1.0), ("scaled_sign", 0.9)):
        for d, eps in ((1, 0.05), (2, 0.2), (4, 0.5)):
            base = JuntaAlgorithm.sliding(n, d)
            if scale == 1.0:
                A = base
            else:
                tabs = [[scale * (-1) ** ((len(b) - bin(i).count("1")) % 2) for i in range(1 << len(b))]
                        for b in base.blocks]
                A = JuntaAlgorithm(n, d, base.blocks, "table", tabs)
            c_norm = scale * scale
            for r in (1.0, 2.0):
                sq = np.empty(m)
                for t in range(m):
                    g = sample_instance(n, "gaussian", 48, derive_seed(12, d, t, "g"))
                    gp = resampled_pair(g, eps, derive_seed(12, d, t, "pair")).g_prime
                    a, b = _wrapper(A, g, r), _wrapper(A, gp, r)
                    sq[t] = float(np.sum((a - b) ** 2))
                bound = 4 * c_norm * d * eps * n + 8 * r * r
                sig = sq.std(ddof=1) / math.sqrt(m)
                cell_ok = sq.mean() <= bound + 4 * sig
                ok &= cell_ok
                out.append(f"{family} D={d} eps={eps} r={r:g}: {sq.mean():.2f} <= {bound:.2f}")
    report(12, "local-improvement wrapper", ok, "; ".join(out), t0)


DETERMINISM_CONFIGS = [
    {"experiment": "obstruction", "n": 14, "scale_bits": 48, "energy": 6, "eps": "ldp", "trials": 60, "seed": 13},
    {"experiment": "obstruction", "n": 12, "scale_bits": 64, "energy": 6, "eps": 0.2, "mode": "correlated",
     "solver": "kk", "trials": 60, "seed": 13},
    {"experiment": "repel", "n": 16, "scale_bits": 48, "energy": 8, "k": 2, "trials": 60, "seed": 13},
    {"experiment": "stability", "n": 24, "eps": 0.2, "degree": 3, "trials": 10_000, "seed": 13},
    {"experiment": "rounding", "n": 10, "scale_bits": 40, "energy": 4, "degree": 2, "radius": 2.0, "trials": 60,
     "seed": 13},
    {"experiment": "scaling", "n": [10, 14], "scale_bits": 48, "trials": 40, "seed": 13, "solver": "hybrid:6"},
]


def test_c13_determinism(tmp_path):
    t0 = time.perf_counter()
    diffs = []
    for i, cfg in enumerate(DETERMINISM_CONFIGS):
        _, first = run_experiment(tmp_path, f"d{i}", cfg)
        manifest = json.loads((first / "manifest.json").read_text())
        ref = (first / "records.csv").read_bytes()
        for w in (1, 2, 4):
            _, again = run_experiment(tmp_path, f"d{i}w{w}", manifest, workers=w)
            if (again / "records.csv").read_bytes() != ref:
                diffs.append((cfg["experiment"], w))
    report(13, "determinism", not diffs,
           f"{len(DETERMINISM_CONFIGS)} configs replayed from manifest at workers 1/2/4, mismatches={diffs}", t0)
