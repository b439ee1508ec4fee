"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Tolerances and runtime budgets are fixed here and not tuned afterwards.
Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed at the end of the session.
"""
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from difforensics import (AnalysisParams, FloatImage, RegionSpec, ReferenceSpec, amplify_split,
                          analyze_pair, analyze_video, build_kernel, forgery_score,
                          spatial_filter, subtract)
from difforensics._backend import available_backends
from difforensics.forgery import CONSISTENT, INCONSISTENT, INSUFFICIENT
from difforensics.pipeline import filtered_noise_factor
from difforensics.synth import (EvidenceField, SceneSpec, evaluate_recovery, generate_pair,
                                generate_stream)
from difforensics.video import change_point
from oracles import amplify_loop, dense_convolve, subtract_loop

RESULTS: list[str] = []
GREEN = (0.2, 0.6, 0.2)


def record(name, ok, detail):
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, detail


def random_field(r, width, height, kind="reflection", peak=2 / 255, chroma=GREEN):
    rx, ry = r.uniform(25, 50, 2)
    return EvidenceField(kind, str(r.choice(["ellipse", "rect"])),
                         cx=r.uniform(rx, width - rx), cy=r.uniform(ry, height - ry),
                         rx=rx, ry=ry, peak=peak, chroma=chroma)


def test_ac1_subtract_and_amplify_match_loops():
    r = np.random.default_rng(1)
    t0 = time.perf_counter()
    sub_ok, amp_err = True, 0.0
    for _ in range(200):
        a, b = r.random((16, 16, 3)), r.random((16, 16, 3))
        d = subtract(FloatImage(a), FloatImage(b))
        sub_ok &= np.array_equal(d.data, subtract_loop(a, b))
        pair = amplify_split(d)
        plus, minus, _, _ = amplify_loop(d.data)
        amp_err = max(amp_err, np.abs(pair.d_plus.data - plus).max(),
                      np.abs(pair.d_minus.data - minus).max())
    dt = time.perf_counter() - t0
    record("AC1 subtract/amplify oracle equivalence", sub_ok and amp_err <= 1e-9 and dt < 5,
           f"subtract exact={sub_ok}, max amplify err={amp_err:.2e} (<=1e-9), {dt:.2f}s (<5s)")


def test_ac2_separable_matches_dense():
    r = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    sigmas = (1, 2, 9)
    for k in range(50):
        h, w = (int(v) for v in r.integers(4, 65, 2))
        c = int(r.choice([1, 3]))
        img = r.standard_normal((h, w, c))
        sigma = sigmas[k % 3]
        kern = build_kernel(AnalysisParams(sigma=sigma))
        oracle = dense_convolve(img, sigma, kern.radius)
        for be in available_backends():
            got = spatial_filter(FloatImage(img), kern, backend=be).data
            worst = max(worst, np.abs(got - oracle).max())
    dt = time.perf_counter() - t0
    record("AC2 separable vs dense convolution", worst <= 1e-6 and dt < 30,
           f"max err={worst:.2e} (<=1e-6) over backends {available_backends()}, {dt:.2f}s (<30s)")


def test_ac3_noise_suppression():
    t0 = time.perf_counter()
    s = 0.01
    kern = build_kernel(AnalysisParams(sigma=9))
    r = np.random.default_rng(3)
    # pool 8 three-channel 512x512 realizations; mirrored borders duplicate samples,
    # so only the interior is free of boundary correlation
    inner = slice(kern.radius, -kern.radius)
    sq, n = 0.0, 0
    for _ in range(8):
        out = spatial_filter(FloatImage(r.standard_normal((512, 512, 3)) * s), kern).data
        core = out[inner, inner]
        sq += float(np.square(core - core.mean(axis=(0, 1))).sum())
        n += core.size
    got = math.sqrt(sq / n)
    expect = s * filtered_noise_factor(kern)
    analytic = s / (2 * 9 * math.sqrt(math.pi))
    dt = time.perf_counter() - t0
    rel = abs(got / expect - 1)
    ok = rel <= 0.05 and abs(expect / analytic - 1) <= 0.01 and dt < 10
    record("AC3 filtered noise std", ok,
           f"measured={got / s:.5f}s, discrete={expect / s:.5f}s, analytic={analytic / s:.5f}s, "
           f"rel err={rel:.4f} (<=0.05), {dt:.2f}s (<10s)")


def test_ac4_sub_perceptual_recovery():
    r = np.random.default_rng(4)
    t0 = time.perf_counter()
    hits, ious = 0, []
    for seed in range(50):
        f = random_field(r, 256, 256)
        sc = generate_pair(SceneSpec(width=256, height=256, evidence=(f,), noise_std=1 / 255,
                                     seed=seed))
        m = evaluate_recovery(analyze_pair(sc.p, sc.p_ref, AnalysisParams(sigma=9)),
                              sc.truth[0], 0.5)
        hits += m.argmax_hit
        ious.append(m.iou)
    dt = time.perf_counter() - t0
    ok = hits / 50 >= 0.95 and np.mean(ious) >= 0.3 and dt < 60
    record("AC4 sub-perceptual recovery (peak 2/255, noise 1/255)", ok,
           f"argmax hits={hits}/50 (>=95%), mean IoU={np.mean(ious):.3f} (>=0.3), "
           f"{dt:.2f}s (<60s)")


def test_ac5_sign_semantics():
    r = np.random.default_rng(5)
    ok_refl = ok_occ = 0
    for seed in range(20):
        for kind in ("reflection", "occlusion"):
            f = random_field(r, 192, 160, kind=kind)
            sc = generate_pair(SceneSpec(width=192, height=160, evidence=(f,), noise_std=0.0,
                                         seed=seed))
            pair = analyze_pair(sc.p, sc.p_ref)
            if kind == "reflection":
                ok_refl += pair.degenerate_minus and not pair.degenerate_plus
            else:
                ok_occ += pair.degenerate_plus and not pair.degenerate_minus
    record("AC5 reflection->D+ only, occlusion->D- only", ok_refl == 20 and ok_occ == 20,
           f"reflection {ok_refl}/20, occlusion {ok_occ}/20 (100% required)")


def test_ac6_transition_detection():
    t0 = time.perf_counter()
    good, cps = 0, []
    for seed in range(20):
        r = np.random.default_rng(600 + seed)
        f = EvidenceField("reflection", "ellipse", cx=r.uniform(40, 88), cy=r.uniform(40, 88),
                          rx=r.uniform(25, 35), ry=r.uniform(25, 35), peak=2 / 255, chroma=GREEN)
        spec = SceneSpec(width=128, height=128, evidence=(f,), noise_std=1 / 255, seed=seed)
        stream, _ = generate_stream(spec, 120, 60)
        res = analyze_video(stream, ReferenceSpec.frame_range(0, 40),
                            AnalysisParams(sigma=9, temporal_window=11))
        cp = change_point(res.energy, res.frame_indices)
        cps.append(cp)
        good += abs(cp - 60) <= 5
    dt = time.perf_counter() - t0
    record("AC6 intruder transition in energy", good >= 18 and dt < 120,
           f"change point within 60+-5 in {good}/20 (>=18), points={cps}, {dt:.1f}s (<120s)")


def _forgery_case(seed, query_chroma, evidence=True, noise=1 / 255):
    r = np.random.default_rng(700 + seed)
    fields = (EvidenceField("reflection", "ellipse", cx=r.uniform(50, 90), cy=r.uniform(45, 80),
                            rx=r.uniform(28, 40), ry=r.uniform(25, 35), peak=2 / 255,
                            chroma=GREEN),) if evidence else ()
    sc = generate_pair(SceneSpec(width=224, height=160, evidence=fields, noise_std=noise,
                                 seed=seed))
    x, y = int(r.integers(150, 180)), int(r.integers(90, 115))
    p = sc.p.copy_array()
    c = np.asarray(query_chroma, dtype=float)
    p[y:y + 40, x:x + 40] = c / c.sum() * 3 * r.uniform(0.2, 0.3)
    return forgery_score(FloatImage(p), sc.p_ref, RegionSpec(rect=(x, y, 40, 40)))


def _far_chroma(r):
    while True:
        rgb = r.dirichlet((1, 1, 1))
        if math.dist(rgb[:2], GREEN[:2]) >= 0.4:
            return tuple(rgb)


def test_ac7_forgery_verdicts():
    r = np.random.default_rng(7)
    cons = sum(_forgery_case(s, GREEN).verdict == CONSISTENT for s in range(20))
    incons = sum(_forgery_case(s, _far_chroma(r)).verdict == INCONSISTENT for s in range(20))
    insuff = sum(_forgery_case(s, _far_chroma(r), evidence=False, noise=0.0).verdict
                 == INSUFFICIENT for s in range(20))
    record("AC7 forgery verdicts", cons == incons == insuff == 20,
           f"consistent {cons}/20, inconsistent {incons}/20, insufficient {insuff}/20")


def _cli(args, env=None):
    return subprocess.run([sys.executable, "-m", "difforensics", *args], capture_output=True,
                          text=True, env=dict(os.environ, **(env or {})))


def _tree(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.mark.slow
def test_ac8_defaults_and_full_resolution_budget(tmp_path):
    from difforensics import io

    # defaults reported unchanged
    cfg = tmp_path / "small.cfg"
    cfg.write_text("width: 40\nheight: 30\nnoise_std: 1/255\nseed: 1\n"
                   "evidence: reflection ellipse cx=20 cy=15 rx=10 ry=8 peak=2/255\n")
    assert _cli(["synth", "--spec", str(cfg), "--frames", "12", "--entry", "6",
                 "--out", str(tmp_path / "s")]).returncode == 0
    assert _cli(["synth", "--spec", str(cfg), "--out", str(tmp_path / "p")]).returncode == 0
    assert _cli(["diff", "--scene", str(tmp_path / "p" / "p.png"), "--ref",
                 str(tmp_path / "p" / "p_ref.png"), "--out", str(tmp_path / "d")]).returncode == 0
    assert _cli(["video", "--manifest", str(tmp_path / "s" / "manifest.tsv"), "--ref-range", "0:5",
                 "--frame-outputs", "none", "--out", str(tmp_path / "v")]).returncode == 0
    reports = [io.read_report(tmp_path / sub / "report.txt") for sub in ("d", "v")]
    defaults_ok = all(rep["sigma"] == "9" and rep["temporal_window"] == "11" for rep in reports)

    # 2448 x 3264 pair end to end through the CLI (float dumps in, all artifacts out)
    spec = SceneSpec(width=2448, height=3264, noise_std=1 / 255, seed=8,
                     evidence=(EvidenceField("reflection", "ellipse", cx=900, cy=1200, rx=300,
                                             ry=240, peak=2 / 255, chroma=GREEN),))
    sc = generate_pair(spec)
    io.write_float_dump(sc.p, tmp_path / "p8.difd")
    io.write_float_dump(sc.p_ref, tmp_path / "r8.difd")
    del sc
    t0 = time.perf_counter()
    res = _cli(["diff", "--scene", str(tmp_path / "p8.difd"), "--ref", str(tmp_path / "r8.difd"),
                "--out", str(tmp_path / "big")])
    dt = time.perf_counter() - t0
    rep = io.read_report(tmp_path / "big" / "report.txt") if res.returncode == 0 else {}
    ok = defaults_ok and res.returncode == 0 and dt < 60 and rep.get("sigma") == "9"
    record("AC8 default parameters and 8-megapixel budget", ok,
           f"defaults in reports={defaults_ok}, 2448x3264 diff exit={res.returncode} in "
           f"{dt:.1f}s (<60s)")


def test_ac9_cli_determinism(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text("width: 120\nheight: 90\nnoise_std: 1/255\n"
                   "evidence: reflection ellipse cx=40 cy=35 rx=26 ry=22 peak=2/255 chroma=1,3,1\n")
    runs = []
    for k in range(2):
        out = tmp_path / f"synth{k}"
        assert _cli(["synth", "--spec", str(cfg), "--seed", "7", "--out", str(out)]).returncode == 0
        runs.append(_tree(out))
        assert _cli(["synth", "--spec", str(cfg), "--seed", "7", "--frames", "16", "--entry", "8",
                     "--out", str(tmp_path / f"stream{k}")]).returncode == 0
    synth_same = runs[0] == runs[1] and _tree(tmp_path / "stream0") == _tree(tmp_path / "stream1")

    s = tmp_path / "synth0"
    commands = {
        "diff": ["diff", "--scene", str(s / "p.png"), "--ref", str(s / "p_ref.png")],
        "forgery": ["forgery", "--scene", str(s / "p.difd"), "--ref", str(s / "p_ref.difd"),
                    "--rect", "80,50,30,30"],
        "video": ["video", "--manifest", str(tmp_path / "stream0" / "manifest.tsv"),
                  "--ref-range", "0:5", "--window", "5", "--frame-outputs", "all"],
    }
    analysis_same = True
    for name, args in commands.items():
        trees = []
        for be in available_backends():
            for workers in ("1", "4"):
                out = tmp_path / f"{name}-{be}-{workers}"
                res = _cli(args + ["--workers", workers, "--out", str(out)],
                           {"DIFFORENSICS_BACKEND": be})
                assert res.returncode == 0, res.stderr
                trees.append(_tree(out))
        analysis_same &= all(t == trees[0] for t in trees[1:])
    record("AC9 byte-identical CLI artifacts", synth_same and analysis_same,
           f"synth repeat identical={synth_same}, diff/forgery/video identical across "
           f"backends {available_backends()} x workers {{1,4}}={analysis_same}")
