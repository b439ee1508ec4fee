import numpy as np
import pytest

from difforensics import AnalysisParams, ParameterError, analyze_pair, subtract
from difforensics.pipeline import AmplifiedPair, amplify_split
from difforensics.image import FloatImage
from difforensics.synth import (EvidenceField, SceneSpec, evaluate_recovery, format_scene_config,
                                generate_pair, generate_stream, parse_scene_config)


def field(**kw):
    base = dict(kind="reflection", shape="ellipse", cx=40, cy=30, rx=15, ry=12, peak=2 / 255,
                chroma=(0.2, 0.6, 0.2))
    base.update(kw)
    return EvidenceField(**base)


def test_no_evidence_no_noise_identical():
    sc = generate_pair(SceneSpec(width=32, height=24, noise_std=0))
    assert np.array_equal(sc.p.data, sc.p_ref.data)


@pytest.mark.parametrize("shape", ["ellipse", "rect"])
def test_noise_free_difference_is_field(shape):
    f = field(shape=shape)
    sc = generate_pair(SceneSpec(width=80, height=60, evidence=(f,), noise_std=0))
    d = subtract(sc.p, sc.p_ref).data
    # (b + f) - b recovers f up to rounding of the sum
    assert np.abs(d - f.values(80, 60)).max() <= 1e-16
    assert np.array_equal(d > 0, np.repeat(sc.truth[0][:, :, None], 3, axis=2))


def test_deterministic():
    spec = SceneSpec(width=40, height=30, evidence=(field(),), seed=99)
    a, b = generate_pair(spec), generate_pair(spec)
    assert np.array_equal(a.p.data, b.p.data) and np.array_equal(a.p_ref.data, b.p_ref.data)
    c = generate_pair(SceneSpec(width=40, height=30, evidence=(field(),), seed=100))
    assert not np.array_equal(a.p.data, c.p.data)


def test_noise_level():
    sc = generate_pair(SceneSpec(width=200, height=200, base="constant", noise_std=0.01, seed=1))
    d = subtract(sc.p, sc.p_ref).data
    assert abs(d.std() / (0.01 * np.sqrt(2)) - 1) < 0.02


@pytest.mark.parametrize("base", ["constant", "linear-gradient", "textured"])
def test_bases_in_range(base):
    sc = generate_pair(SceneSpec(width=70, height=50, base=base, noise_std=0, seed=4))
    assert 0 <= sc.p.data.min() and sc.p.data.max() <= 1


def test_field_profile_peak_and_chroma():
    f = field()
    v = f.values(80, 60)
    assert v.max() == pytest.approx(2 / 255)
    assert v[30, 40] == pytest.approx(np.array([2 / 3, 2, 2 / 3]) / 255)
    assert (f.values(80, 60) >= 0).all()
    assert (field(kind="occlusion").values(80, 60) <= 0).all()


@pytest.mark.parametrize("kw", [dict(peak=9 / 255), dict(peak=0), dict(kind="glow"),
                                dict(taper=0), dict(rx=0), dict(chroma=(1, -1, 1))])
def test_field_validation(kw):
    with pytest.raises(ParameterError):
        field(**kw)


def test_out_of_range_spec_rejected():
    spec = SceneSpec(width=40, height=30, base="constant", base_level=0.999,
                     evidence=(field(peak=8 / 255),))
    with pytest.raises(ParameterError):
        generate_pair(spec)


def test_stream_entry():
    spec = SceneSpec(width=40, height=30, evidence=(field(),), noise_std=0)
    stream, truth = generate_stream(spec, 6, 3)
    base = stream.frame(0).data
    assert np.array_equal(stream.frame(2).data, base)
    assert not np.array_equal(stream.frame(3).data, base)
    all_ev, _ = generate_stream(spec, 4, 0)
    assert all(not np.array_equal(all_ev.frame(i).data, base) for i in range(4))
    none, _ = generate_stream(spec, 4, 4)
    assert all(np.array_equal(none.frame(i).data, base) for i in range(4))
    with pytest.raises(ParameterError):
        generate_stream(spec, 4, 5)


def test_stream_frames_have_independent_noise():
    stream, _ = generate_stream(SceneSpec(width=20, height=20, noise_std=0.01, seed=2), 3, 3)
    assert not np.array_equal(stream.frame(0).data, stream.frame(1).data)
    assert np.array_equal(stream.frame(1).data, stream.frame(1).data)


def test_evaluate_self_comparison():
    f = field(taper=0.5)
    prof = f.profile(80, 60)
    truth = prof > 0
    vals = f.values(80, 60)
    pair = amplify_split(FloatImage(vals))
    m = evaluate_recovery(pair, truth, 0.5, f.chroma)
    half_support = (prof >= 0.5).sum() / truth.sum()
    assert m.iou == pytest.approx(half_support)
    assert m.argmax_hit
    assert m.chroma_error == pytest.approx(0, abs=1e-12)


def test_evaluate_degenerate():
    z = FloatImage(np.zeros((10, 10, 3)))
    pair = AmplifiedPair(z, z, 0.0, 0.0, True, True)
    truth = np.zeros((10, 10), bool)
    truth[2:5, 2:5] = True
    m = evaluate_recovery(pair, truth)
    assert m.iou == 0 and not m.argmax_hit
    with pytest.raises(ParameterError):
        evaluate_recovery(pair, np.zeros((10, 10), bool))


def test_noise_free_chroma_error():
    f = field(cx=64, cy=60, rx=40, ry=34)
    sc = generate_pair(SceneSpec(width=128, height=120, evidence=(f,), noise_std=0, seed=8))
    m = evaluate_recovery(analyze_pair(sc.p, sc.p_ref), sc.truth[0], 0.5, f.chroma)
    assert m.chroma_error <= 0.02
    assert m.argmax_hit


def test_sign_semantics_noise_free():
    refl = generate_pair(SceneSpec(width=64, height=64, evidence=(field(cx=32, cy=32),), noise_std=0))
    pair = analyze_pair(refl.p, refl.p_ref)
    assert pair.degenerate_minus and not pair.degenerate_plus
    occ = generate_pair(SceneSpec(width=64, height=64, noise_std=0,
                                  evidence=(field(cx=32, cy=32, kind="occlusion"),)))
    pair = analyze_pair(occ.p, occ.p_ref)
    assert pair.degenerate_plus and not pair.degenerate_minus


def _random_spec(r, seed, noise):
    rx, ry = r.uniform(20, 40, 2)
    f = field(cx=r.uniform(rx, 128 - rx), cy=r.uniform(ry, 128 - ry), rx=rx, ry=ry,
              shape=r.choice(["ellipse", "rect"]))
    return SceneSpec(width=128, height=128, evidence=(f,), noise_std=noise, seed=seed)


@pytest.mark.slow
def test_noise_free_argmax_always_in_support():
    r = np.random.default_rng(2024)
    for seed in range(50):
        sc = generate_pair(_random_spec(r, seed, 0.0))
        assert evaluate_recovery(analyze_pair(sc.p, sc.p_ref), sc.truth[0]).argmax_hit


def _mean_iou_sweep(levels, geometry_seed=77):
    means = []
    for noise in levels:
        ious = []
        r = np.random.default_rng(geometry_seed)
        for seed in range(20):
            sc = generate_pair(_random_spec(r, seed, noise / 255))
            ious.append(evaluate_recovery(analyze_pair(sc.p, sc.p_ref), sc.truth[0]).iou)
        means.append(float(np.mean(ious)))
    return means


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=(
    "weak noise (1/255) widens the half-maximum region of a smooth bump slightly more "
    "than it raises the normalizing peak, so mean IoU rises by ~0.2% from noise 0 to 1/255"))
def test_recovery_non_increasing_over_full_sweep():
    means = _mean_iou_sweep((0, 1, 2, 4))
    assert all(b <= a for a, b in zip(means, means[1:])), means


@pytest.mark.slow
def test_recovery_degrades_once_noise_is_present():
    means = _mean_iou_sweep((0, 1, 2, 4))
    assert means[1] > means[2] > means[3]
    assert means[3] < means[0]


def test_config_round_trip():
    text = """
    # demo scene
    width: 64
    height: 48
    base: linear-gradient
    noise_std: 1/255
    seed: 7
    frames: 10
    entry_frame: 4
    evidence: reflection ellipse cx=20 cy=20 rx=10 ry=8 peak=2/255 chroma=1,3,1
    evidence: occlusion rect cx=45 cy=30 rx=6 ry=6 peak=0.01
    """
    spec, stream = parse_scene_config(text)
    assert spec.width == 64 and spec.noise_std == pytest.approx(1 / 255)
    assert stream == {"frames": 10, "entry_frame": 4}
    assert spec.evidence[0].chroma == pytest.approx((0.2, 0.6, 0.2))
    assert spec.evidence[1].kind == "occlusion"
    again, stream2 = parse_scene_config(format_scene_config(spec, **stream))
    assert again == spec and stream2 == stream


@pytest.mark.parametrize("text", ["width 5", "bogus: 1", "width: 2.5",
                                  "evidence: reflection ellipse peak=x",
                                  "evidence: reflection ellipse what=1"])
def test_config_errors(text):
    with pytest.raises(ParameterError):
        parse_scene_config(text)
