"""Acceptance checks. Run with ``pytest tests/test_acceptance.py -s`` to see
one PASS/FAIL line per criterion."""

import math
import time

import numpy as np
import pytest
from scipy import stats as sstats

from brainrg import vio
from brainrg.morphology import FULL26, connected_components, dilate, erode, morphological_gradient
from brainrg.phantom import make_phantom
from brainrg.report import TemplateTable, run_mode, stub_reporter
from brainrg.roiselect import regional_prompts
from brainrg.segmetrics import dice_ce_loss, dsc, hausdorff, precision, sensitivity, structure_loss
from brainrg.synthlesion import (
    HYPER,
    HYPO,
    IntensityStats,
    SynthConfig,
    apply_recipe,
    inpaint_lesion,
    intensity_interval,
    replay,
    sample_intensity,
    synthesize,
)
from brainrg.textmetrics import BLEU1_WEIGHTS, bleu, rouge_n
from brainrg.volume import AtlasLabelMap, BinaryMask, Volume, brain_mask

from . import oracles
from .conftest import mask_from


def _run(number, title, body):
    try:
        body()
    except BaseException:
        print(f"\nFAIL criterion {number}: {title}")
        raise
    print(f"\nPASS criterion {number}: {title}")


def _rel_close(a, b, rel):
    if a is None or b is None:
        return a is b
    return abs(a - b) <= rel * max(abs(a), abs(b)) or a == b


def test_c01_metric_oracle_equivalence():
    def body():
        rng = np.random.default_rng(101)
        impl_time = 0.0
        for _ in range(500):
            dens = rng.uniform(0.02, 0.6, size=2)
            p = BinaryMask(rng.random((8, 8, 8)) < dens[0])
            g = BinaryMask(rng.random((8, 8, 8)) < dens[1])
            t0 = time.perf_counter()
            got = (dsc(p, g), precision(p, g), sensitivity(p, g))
            hd = hausdorff(p, g) if p.any() and g.any() else None
            impl_time += time.perf_counter() - t0
            want = oracles.set_metrics(p.bits, g.bits)
            assert all(_rel_close(a, b, 1e-12) for a, b in zip(got, want)), (got, want)
            if hd is not None:
                assert hd == oracles.directed_hd_matrix(p.bits, g.bits, (1.0, 1.0, 1.0))
        assert impl_time < 10.0, impl_time

    _run(1, "metric oracle equivalence (500 pairs at 8^3)", body)


def test_c02_formula_fixtures():
    def body():
        dims = (8, 1, 1)
        a = mask_from(dims, [(0, 0, 0), (1, 0, 0)])
        b = mask_from(dims, [(1, 0, 0), (2, 0, 0)])
        assert abs(dsc(a, b) - 0.5) <= 1e-9
        p = mask_from(dims, [(0, 0, 0)])
        g = mask_from(dims, [(0, 0, 0), (5, 0, 0)])
        assert abs(hausdorff(p, g) - 0.0) <= 1e-9
        assert abs(hausdorff(g, p) - 5.0) <= 1e-9
        assert abs(bleu("a b c d".split(), ["a b x d".split()], BLEU1_WEIGHTS) - 0.75) <= 1e-9
        assert abs(rouge_n("a c".split(), ["a b a".split()], 1) - 1 / 3) <= 1e-9

    _run(2, "formula fixtures (dsc 0.5, HD 0/5, BLEU-1 0.75, ROUGE-1 1/3)", body)


def test_c03_synthesis_invariants():
    def body():
        vol, atlas = make_phantom(32, seed=0)
        brain = brain_mask(atlas)
        t0 = time.perf_counter()
        for seed in range(200):
            cfg = SynthConfig(polarity_probability_hyper=[0.0, 0.5, 1.0][seed % 3])
            res = synthesize(vol, atlas, cfg, seed)
            assert not (res.mask - brain).any()
            # replay stepwise to check every lesion center against its own stats
            current = vol
            for r in res.recipes:
                step = apply_recipe(current, vol, atlas, r)
                centre = float(step.volume.data[r.center])
                if r.polarity == HYPER:
                    assert centre > step.stats.avg, (seed, centre, step.stats)
                else:
                    assert centre < step.stats.avg, (seed, centre, step.stats)
                current = step.volume
            assert np.array_equal(current.data, res.volume.data)
            again = replay(vol, atlas, res.recipes)
            assert again.volume.data.tobytes() == res.volume.data.tobytes()
            assert again.mask == res.mask
            if seed % 20 == 0:
                twin = synthesize(vol, atlas, cfg, seed)
                assert twin.volume.data.tobytes() == res.volume.data.tobytes()
                assert twin.mask == res.mask and twin.recipes == res.recipes
        elapsed = time.perf_counter() - t0
        assert elapsed < 60.0, elapsed

    _run(3, "synthesis invariants (200 seeded runs on 32^3)", body)


def test_c04_intensity_law():
    def body():
        st = IntensityStats(avg=100.0, min=20.0, max=180.0)
        eps = 15.0
        rng = np.random.default_rng(4)
        for polarity in (HYPER, HYPO):
            lo, hi = intensity_interval(st, polarity, eps)
            expected = (115.0, 180.0) if polarity == HYPER else (20.0, 85.0)
            assert (lo, hi) == expected
            draws = np.array([sample_intensity(st, polarity, eps, rng) for _ in range(10_000)])
            assert draws.min() >= lo and draws.max() <= hi
            ks = sstats.kstest(draws, "uniform", args=(lo, hi - lo))
            assert ks.pvalue > 0.01, ks

    _run(4, "intensity law (10,000 draws, KS vs uniform at alpha 0.01)", body)


def test_c05_inpainting_law():
    def body():
        background, ia = 40.0, 200.0
        vol = Volume(np.full((9, 9, 9), background, dtype=np.float32))
        lesion = BinaryMask(np.ones((9, 9, 9), dtype=bool))
        sigma_b = 3.0 / math.sqrt(2.0 * math.log(2.0))
        out = inpaint_lesion(vol, lesion, (4, 4, 4), ia, sigma_b)
        assert out.data[4, 4, 4] == np.float32(ia)
        mid = (background + ia) / 2.0
        for v in ((7, 4, 4), (4, 1, 4), (4, 4, 7)):
            assert abs(float(out.data[v]) - mid) <= 1e-5 * mid, out.data[v]

    _run(5, "inpainting law (center = I_a, half-weight radius gives midpoint)", body)


def _random_atlas(rng, dims, n_labels):
    # blocky labels so structures are contiguous-ish but irregular
    coarse = rng.integers(0, n_labels + 1, size=tuple(-(-d // 3) for d in dims))
    labels = np.kron(coarse, np.ones((3, 3, 3), dtype=np.int64))[: dims[0], : dims[1], : dims[2]]
    return AtlasLabelMap(labels.astype(np.uint16), {l: f"s{l}" for l in range(1, n_labels + 1)})


def test_c06_roi_selector_oracle():
    def body():
        rng = np.random.default_rng(606)
        impl_time = 0.0
        for i in range(100):
            atlas = _random_atlas(rng, (12, 12, 12), int(rng.integers(1, 9)))
            anomaly = BinaryMask(rng.random((12, 12, 12)) < rng.uniform(0.0, 0.08))
            conn = 26 if i % 2 else 6
            t0 = time.perf_counter()
            got = regional_prompts(anomaly, atlas, conn)
            impl_time += time.perf_counter() - t0
            want = oracles.regional_prompts(anomaly.bits, atlas.labels, conn)
            assert len(got) == len(want)
            for k, (prompt, (comp, labels, mask)) in enumerate(zip(got, want)):
                assert prompt.component_index == k
                assert set(prompt.structure_labels) == labels
                assert np.array_equal(prompt.mask.bits, mask)
            comps = connected_components(anomaly, conn)
            assert [oracles.voxel_set(c.bits) for c in comps] == [w[0] for w in want]
        assert impl_time < 10.0, impl_time

    _run(6, "ROI selector oracle (100 random pairs at 12^3)", body)


def test_c07_morphology_laws():
    def body():
        rng = np.random.default_rng(707)
        for i in range(1000):
            m = BinaryMask(rng.random((6, 6, 6)) < rng.uniform(0.05, 0.95))
            se = FULL26 if i % 2 else None
            kw = {"se": se} if se is not None else {}
            assert erode(m, **kw) == ~dilate(~m, border_value=True, **kw)
            assert morphological_gradient(m, **kw) == dilate(m, **kw) - erode(m, **kw)
            for conn in (6, 26):
                comps = connected_components(m, conn)
                union = np.zeros(m.dims, dtype=bool)
                total = 0
                for c in comps:
                    assert c.any() and not (c.bits & union).any()
                    union |= c.bits
                    total += c.popcount()
                assert np.array_equal(union, m.bits) and total == m.popcount()
                sizes = [c.popcount() for c in comps]
                assert sizes == sorted(sizes, reverse=True)
                # no two components touch under the chosen connectivity
                grown = [dilate(c, FULL26) if conn == 26 else dilate(c) for c in comps]
                for a in range(len(comps)):
                    for b in range(a + 1, len(comps)):
                        assert not (grown[a] & comps[b]).any()

    _run(7, "morphology laws (1,000 random 6^3 masks)", body)


def test_c08_loss_behavior():
    def body():
        rng = np.random.default_rng(8)
        t = rng.random((6, 6, 6)) < 0.3
        assert dice_ce_loss(t.astype(float), t) <= 1e-5
        assert dice_ce_loss((~t).astype(float), t, 1.0, 0.0) >= 1.0 - 1e-3
        ce = dice_ce_loss(np.array([0.8, 0.2]), np.array([1, 0]), 0.0, 1.0)
        assert abs(ce - 0.2231) <= 1e-3
        labels = rng.integers(0, 4, size=(5, 5, 5)).astype(np.uint16)
        atlas = AtlasLabelMap(labels, {1: "a", 2: "b", 3: "c"})
        preds = [rng.random((5, 5, 5)) for _ in atlas.present_labels()]
        per_class = [dice_ce_loss(p, labels == l) for p, l in zip(preds, atlas.present_labels())]
        assert abs(structure_loss(preds, atlas) - sum(per_class) / len(per_class)) <= 1e-9

    _run(8, "loss behavior (bounds, CE fixture 0.2231, class mean)", body)


def test_c09_mode_consistency():
    def body():
        templates = TemplateTable()
        for k in range(20):
            vol, atlas = make_phantom(24, seed=k)
            cfg = SynthConfig(lesion_count_range=(1, 4))
            res = synthesize(vol, atlas, cfg, 1000 + k)
            reporter = stub_reporter(res.mask)
            auto = run_mode("autoseg", res.volume, atlas, reporter, templates, anomaly=res.mask)
            prompts = regional_prompts(res.mask, atlas)
            manual = run_mode("prompt", res.volume, atlas, reporter, templates, user_prompts=prompts)
            assert auto.text.encode() == manual.text.encode()
            glob = run_mode("global", res.volume, atlas, reporter, templates)
            for label in atlas.present_labels():
                assert glob.text.count(f"the {atlas.name_of(label)}") == 1, (k, label, glob.text)

    _run(9, "mode consistency (20 fixtures, global covers each structure once)", body)


def test_c10_io_round_trip(tmp_path):
    def body():
        rng = np.random.default_rng(10)
        for i in range(200):
            dims = tuple(int(d) for d in rng.integers(1, 9, size=3))
            spacing = tuple(float(s) for s in rng.choice([0.5, 0.9375, 1.0, 1.5, 2.0], size=3))
            kind = i % 3
            if kind == 0:
                obj = Volume(rng.normal(0, 1e3, size=dims).astype(np.float32), spacing)
            elif kind == 1:
                labels = rng.integers(0, 40, size=dims).astype(np.uint16)
                names = {int(l): f"structure {l}" for l in np.unique(labels) if l}
                obj = AtlasLabelMap(labels, names, spacing)
            else:
                obj = BinaryMask(rng.random(dims) < 0.5, spacing)
            path = tmp_path / f"o{i}.vvl"
            vio.write(path, obj)
            back = vio.read(path)
            assert type(back) is type(obj) and back == obj and back.spacing == obj.spacing
        raw = bytearray(vio.encode(Volume(np.ones((2, 2, 2)))))
        with pytest.raises(vio.BadMagic):
            vio.decode(b"NOPE" + bytes(raw[4:]))
        with pytest.raises(vio.TruncatedPayload):
            vio.decode(bytes(raw[:-1]))
        raw[40:44] = np.float32(np.nan).tobytes()
        with pytest.raises(vio.NonFiniteData):
            vio.decode(bytes(raw))

    _run(10, "IO round trip (200 objects, corrupt-file errors)", body)
