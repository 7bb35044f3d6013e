"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line.

The demo-backed criteria share the session fixture that runs the bundled
demo config twice, so the first of them pays for roughly five minutes of
training.
"""

import hashlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from latent_atlas import storage
from latent_atlas.importance import rank_variables, reconstruction_gain
from latent_atlas.inversion import inversion_loss_and_grad
from latent_atlas.manifold import make_dataset
from latent_atlas.mapping import LinearMap, evaluate_mapping, fit_linear_map, zw_separation
from latent_atlas.models import (
    GanModel,
    StyleConfig,
    SvaeModel,
    VaeConfig,
    VaeModel,
    latent_traversal,
    sample_ancestral,
    train_style_proxy,
    train_svae,
    train_vae,
)
from latent_atlas.models.gan import discriminator_loss, generator_loss, nearest_neighbor_mse
from latent_atlas.models.style import StyleProxyModel
from latent_atlas.models.vae import _init_nets, autoencoder_loss
from latent_atlas.numerics import DenseNet, RngState, grad_check
from latent_atlas.support import build_support_set, diversity_score, sector_ids

from test_importance import LinearToy

pytestmark = pytest.mark.acceptance


def _cells(demo_runs):
    return storage.read_json(demo_runs[0]["out"] / "reports" / "matrix.json")


# ---------------------------------------------------------------- 1


def test_criterion_01_gradient_integrity(verdict):
    t0 = time.perf_counter()
    x = make_dataset(3, 16).flat.astype(np.float64)
    rng = RngState(5)
    errors = {}
    for split in (False, True):
        d = 24 if split else 16
        enc, dec = _init_nets(VaeConfig(latent_dim=d, hidden=(32, 16)), rng, 3 * 256 if split else 256)
        enc, dec = enc.astype(np.float64), dec.astype(np.float64)
        eps = rng.normal((16, d)).astype(np.float64)

        def f():
            loss, _, _, ge, gd = autoencoder_loss(enc, dec, x, eps, 0.01, split)
            return loss, ge + gd

        errors["svae" if split else "vae"] = grad_check(enc.params() + dec.params(), f)

    gen = DenseNet.init([16, 32, 256], ["leaky_relu", "sigmoid"], rng).astype(np.float64)
    disc = DenseNet.init([256, 32, 1], ["leaky_relu", "identity"], rng).astype(np.float64)
    z = rng.normal((8, 16)).astype(np.float64)
    for loss in ("least-squares", "nonsaturating"):

        def fg():
            v, gg, gz = generator_loss(gen, disc, z, loss)
            return v, gg + [gz]

        def fd():
            return discriminator_loss(disc, x, gen(z), loss)

        errors[f"generator/{loss}"] = grad_check(gen.params() + [z], fg)
        errors[f"discriminator/{loss}"] = grad_check(disc.params(), fd)

    enc, dec = _init_nets(VaeConfig(latent_dim=16, hidden=(32, 16)), rng, 256)
    model = VaeModel(enc.astype(np.float64), dec.astype(np.float64), 16, 0.01)
    zz = rng.normal((4, 16)).astype(np.float64)

    def fi():
        total, _, g = inversion_loss_and_grad(model, zz, x[:4], prior=0.01)
        return float(total.sum()), [g]

    errors["inversion"] = grad_check([zz], fi)
    elapsed = time.perf_counter() - t0
    worst = max(errors.values())
    verdict(1, "gradient integrity", worst < 1e-3 and elapsed < 60, f"max rel err {worst:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------- 2


def test_criterion_02_trainability(verdict, demo_runs, demo_data, zoo):
    cfg = demo_runs[0]["summary"]["config"]
    hyper = {m["kind"]: m for m in cfg["models"]}
    fit, _ = demo_data
    details, ok = [], True
    for kind, trainer in (("vae", train_vae), ("svae", train_svae)):
        m = hyper[kind]
        t0 = time.process_time()
        _, log = trainer(fit, VaeConfig(latent_dim=m["latent_dim"], seed=m["seeds"][0], **m["hyperparams"]))
        cpu = time.process_time() - t0
        mse = log.summary()["heldout_mse"]
        ok &= mse <= 0.02 and cpu < 300
        details.append(f"{kind} held-out {mse:.4f} in {cpu:.0f} cpu-s")
    gan = zoo["gan0"]
    samples = sample_ancestral(gan, RngState(3), 256)
    nn = float(nearest_neighbor_mse(samples, fit).mean())
    var = float(samples.reshape(256, -1).var(axis=0).mean())
    ok &= nn < 0.05 and var > 1e-4
    details.append(f"gan nn-mse {nn:.4f}, sample var {var:.4f}")
    verdict(2, "trainability", ok, "; ".join(details))


# ---------------------------------------------------------------- 3


def test_criterion_03_planted_recovery(verdict):
    t0 = time.perf_counter()
    worst, k = 0.0, 0
    for d1, d2 in ((16, 16), (16, 24)):
        for m in (d1, 500):
            rng = RngState(100 + k)
            k += 1
            Z1 = rng.normal((m, d1)).astype(np.float64)
            A = rng.normal((d2, d1)).astype(np.float64)
            Z2 = Z1 @ A.T + 0.01 * rng.normal((m, d2))
            # a ridge small against the noise keeps the square case well posed
            est = fit_linear_map(Z1, Z2, ridge=1e-6).A.astype(np.float64)
            worst = max(worst, np.linalg.norm(est - A) / np.linalg.norm(A))
    elapsed = time.perf_counter() - t0
    verdict(3, "linear-map recovery oracle", worst < 0.05, f"max rel Frobenius {worst:.2e}, {elapsed:.2f}s")


# ---------------------------------------------------------------- 4


def test_criterion_04_type1(verdict, demo_runs):
    m = _cells(demo_runs)
    timings = storage.read_json(demo_runs[0]["out"] / "timings.json")
    cells = {(c["from"], c["to"]): c for c in m["cells"]}
    pairs = [(a, b) for (a, b), c in cells.items() if c["type"] == "type1"]
    fails = []
    for a, b in pairs:
        c = cells[(a, b)]
        r_dst = cells[(b, b)]["r_mse"]
        if not (c["m_mse"] <= 2 * r_dst and c["l_mse"] <= 1.5 * c["l_mse_fit"]):
            fails.append(f"{a}->{b}")
    d = next(x["latent_dim"] for x in demo_runs[0]["summary"]["config"]["models"] if x["kind"] == "vae")
    runtime = sum(v for k, v in timings.items() if k.startswith("train_vae")) + timings["matrix"] + timings["gains"]
    ok = len(pairs) >= 3 and not fails and m["fit_size"] <= 2 * d and runtime < 600
    worst = max(cells[p]["m_mse"] / cells[(p[1], p[1])]["r_mse"] for p in pairs)
    verdict(4, "type-1 relocation", ok, f"{len(pairs)} pairs, worst M/R(dst) {worst:.2f}, support {m['fit_size']}, {runtime:.0f}s, fails {fails}")


# ---------------------------------------------------------------- 5


def test_criterion_05_type2_type3(verdict, demo_runs):
    m = _cells(demo_runs)
    cells = {(c["from"], c["to"]): c for c in m["cells"]}
    base = m["dataset_baseline"]
    fails, shown = [], []
    for (a, b), c in cells.items():
        kinds = {c["from_kind"], c["to_kind"]}
        if c["from_kind"] == "vae" and c["to_kind"] == "svae":
            bound = 2 * cells[(b, b)]["r_mse"]
        elif kinds == {"vae", "gan"}:
            bound = 0.5 * base
        else:
            continue
        shown.append(f"{a}->{b} {c['m_mse']:.4f}/{bound:.4f}")
        if c["m_mse"] > bound:
            fails.append(f"{a}->{b}")
    verdict(5, "type-2/type-3 relocation", bool(shown) and not fails, f"{len(shown)} pairs, baseline {base:.4f}, fails {fails}")


# ---------------------------------------------------------------- 6


def test_criterion_06_identity(verdict, zoo, demo_data):
    _, ev = demo_data
    ok, parts = True, []
    for name in ("vae0", "svae0", "gan0"):
        model = zoo[name]
        rep = evaluate_mapping(model, model, LinearMap.identity(model.latent_dim), ev)
        ok &= rep.l_mse == 0.0 and rep.m_mse == rep.r_mse
        parts.append(f"{name} l={rep.l_mse} m-r={rep.m_mse - rep.r_mse}")
    verdict(6, "identity metrology", ok, "; ".join(parts))


# ---------------------------------------------------------------- 7


def _oracle_ids(Z, selected, th):
    out = np.full(len(Z), -1)
    for sid in range(2 ** len(selected)):
        signs = np.array([-1 if sid >> i & 1 else 1 for i in range(len(selected))])
        inside = np.all(signs * Z[:, selected] >= th, axis=1)
        assert np.all(out[inside] == -1)  # disjoint
        out[inside] = sid
    return out


def _diversity_on_seed(seed, cfg):
    ds = make_dataset(seed, cfg["dataset"]["n"])
    fit, _ = ds.split(cfg["dataset"]["holdout"])
    vm = next(m for m in cfg["models"] if m["kind"] == "vae")
    vae, _ = train_vae(fit, VaeConfig(latent_dim=vm["latent_dim"], seed=0, **vm["hyperparams"]))
    s = cfg["support"]
    rep = rank_variables(vae, fit[: s["gain_images"]])
    ss = build_support_set(vae.encode(fit), rep, s["n_features"], s["threshold"], s["target_size"])
    rand = RngState(s["seed"]).spawn(99).choice(len(fit), len(ss))
    return diversity_score(fit[ss.indices]) / diversity_score(fit[rand])


def test_criterion_07_support_set(verdict, demo_runs):
    Z = 1.3 * RngState(17).normal((10000, 8))
    selected = [6, 1, 3, 0, 5]
    ids = sector_ids(Z, selected, 0.6)
    oracle = _oracle_ids(Z, selected, 0.6)
    # every one of the 2^5 sectors is reachable and nothing else is
    partition_ok = np.array_equal(ids, oracle) and set(ids[ids >= 0]) == set(range(32))
    cfg = demo_runs[0]["summary"]["config"]
    ratios = {42: demo_runs[0]["summary"]["diversity_ratio"]}
    for seed in (1, 2, 3):
        ratios[seed] = _diversity_on_seed(seed, cfg)
    ok = partition_ok and min(ratios.values()) >= 1.3
    shown = ", ".join(f"seed {k}: {v:.2f}" for k, v in ratios.items())
    verdict(7, "support-set construction", ok, f"oracle {'ok' if partition_ok else 'MISMATCH'}, diversity {shown}")


# ---------------------------------------------------------------- 8


def test_criterion_08_feature_importance(verdict, zoo, demo_data):
    z = RngState(0).normal((10000, 2)).astype(np.float64)
    toy = LinearToy()
    data = z * toy.scale
    g = [reconstruction_gain(toy, data, i) for i in (0, 1)]
    toy_ok = abs(g[0] / 0.5 - 1) < 0.05 and abs(g[1] / 0.005 - 1) < 0.05

    vae = zoo["vae0"]
    dec = vae.decoder.copy()
    dec.layers[0].weight[:, 5] = 0
    dead = VaeModel(vae.encoder, dec, vae.latent_dim, vae.gamma)
    fit, _ = demo_data
    dead_gain = reconstruction_gain(dead, fit[:2000], 5)
    _, frames = latent_traversal(dead, dead.encode(fit[:1])[0], 5)
    spread = float(np.abs(frames - frames[:1]).max())
    ok = toy_ok and abs(dead_gain) < 1e-6 and spread < 1e-5
    verdict(8, "feature-importance oracle", ok, f"toy gains ({g[0]:.4f}, {g[1]:.5f}), dead gain {dead_gain:.1e}, traversal spread {spread:.1e}")


# ---------------------------------------------------------------- 9


def test_criterion_09_generative_range(verdict, demo_runs):
    probe = storage.read_json(demo_runs[0]["out"] / "reports" / "probe.json")
    kinds = {name: name.rstrip("0123456789") for name in probe}
    ok = {"gan", "vae"} <= set(kinds.values()) and all(
        p["ratio"] >= 2 and p["method"] == "gradient" for p in probe.values()
    )
    shown = ", ".join(f"{k} {p['ratio']:.0f}x" for k, p in probe.items())
    verdict(9, "generative-range probe", ok, shown)


# ---------------------------------------------------------------- 10


@pytest.fixture(scope="module")
def style_proxy(demo_data):
    fit, _ = demo_data
    model, _, _ = train_style_proxy(fit, StyleConfig(seed=0))
    return model


def test_criterion_10_z_vs_w(verdict, style_proxy, zoo):
    rep = zw_separation(style_proxy, zoo["vae0"])
    verdict(10, "z-vs-w separation", rep["ratio"] >= 1.5, f"L-MSE z {rep['l_mse_z']:.4f}, w {rep['l_mse_w']:.4f}, ratio {rep['ratio']:.2f}")


# ---------------------------------------------------------------- 11


def _digest_tree(root):
    skip = {"timings.json", "summary.json"}
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in skip
    }


def test_criterion_11_reproducibility(verdict, demo_runs):
    a, b = demo_runs
    ta, tb = _digest_tree(a["out"]), _digest_tree(b["out"])
    differing = sorted(k for k in ta.keys() | tb.keys() if ta.get(k) != tb.get(k))
    groups = {g: sum(k.startswith(g) for k in ta) for g in ("models/", "maps/", "reports/")}
    listed = a["summary"]["artifacts"] == b["summary"]["artifacts"]
    cpu = a["cpu_seconds"]
    ok = not differing and listed and all(groups.values()) and "reports/support.json" in ta and cpu <= 1800
    verdict(11, "reproducibility", ok, f"{len(ta)} files identical ({groups}), run cpu {cpu / 60:.1f} min, differing {differing[:3]}")


# ---------------------------------------------------------------- 12

specials = st.sampled_from([np.nan, np.inf, -np.inf, -0.0, 1e-45, -3e-39, 3.4028235e38])


@st.composite
def random_model(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    kind = draw(st.sampled_from(["vae", "svae", "gan", "gan+recoder", "style"]))
    d = draw(st.integers(1, 5))
    px = draw(st.integers(1, 6))
    hidden = draw(st.lists(st.integers(1, 6), max_size=2))
    act = draw(st.sampled_from(["leaky_relu", "tanh", "relu"]))
    rng = RngState(seed)

    def net(d_in, d_out, last="identity"):
        sizes = [d_in, *hidden, d_out]
        return DenseNet.init(sizes, [act] * len(hidden) + [last], rng)

    if kind in ("vae", "svae"):
        out = 3 * px if kind == "svae" else px
        cls = SvaeModel if kind == "svae" else VaeModel
        model = cls(net(px, 2 * d), net(d, out, "sigmoid"), d, draw(st.floats(1e-4, 1.0)), seed=seed % 100)
    elif kind.startswith("gan"):
        rec = net(px, d) if kind == "gan+recoder" else None
        model = GanModel(net(d, px, "sigmoid"), net(px, 1), d, rec, draw(st.sampled_from(["least-squares", "nonsaturating"])))
    else:
        mapping = DenseNet.init([d, 4, d], ["tanh", "identity"], rng)
        model = StyleProxyModel(mapping, net(d, px, "sigmoid"), d)
    # scatter non-finite and extreme values through the parameters
    params = [p for n in model.nets().values() for p in n.params()]
    for _ in range(draw(st.integers(0, 4))):
        p = params[draw(st.integers(0, len(params) - 1))]
        p.flat[draw(st.integers(0, p.size - 1))] = draw(specials)
    return model


_COUNTS = {"tensor": 0, "model": 0}

tensors = hnp.arrays(
    np.float32,
    hnp.array_shapes(min_dims=0, max_dims=5, min_side=0, max_side=5),
    elements=st.floats(width=32, allow_nan=True, allow_infinity=True, allow_subnormal=True),
)


@settings(max_examples=1000, deadline=None, derandomize=True, suppress_health_check=list(HealthCheck))
@given(tensors)
def _tensor_round_trip(arr):
    data = storage.encode_tensor(arr)
    back, end = storage.decode_tensor(data)
    assert end == len(data) and back.shape == arr.shape and back.tobytes() == arr.tobytes()
    _COUNTS["tensor"] += 1


@settings(max_examples=1000, deadline=None, derandomize=True, suppress_health_check=list(HealthCheck))
@given(random_model())
def _model_round_trip(model):
    data = storage.model_to_bytes(model)
    back = storage.model_from_bytes(data)
    assert storage.model_to_bytes(back) == data
    for (ka, na), (kb, nb) in zip(model.nets().items(), back.nets().items()):
        assert ka == kb and na.to_spec() == nb.to_spec()
        assert all(p.tobytes() == q.tobytes() for p, q in zip(na.params(), nb.params()))
    _COUNTS["model"] += 1


def test_criterion_12_formats(verdict):
    failure = None
    try:
        _tensor_round_trip()
        _model_round_trip()
    except AssertionError as exc:  # hypothesis re-raises the minimal failing case
        failure = str(exc).splitlines()[0] if str(exc) else "assertion failed"
    ok = failure is None and _COUNTS["tensor"] >= 1000 and _COUNTS["model"] >= 1000
    verdict(12, "format round trips", ok, f"{_COUNTS['tensor']} tensors, {_COUNTS['model']} models" + (f", {failure}" if failure else ""))
