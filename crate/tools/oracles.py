"""Reference values for the closed-form checks, evaluated with mpmath at 50
digits and frozen into crates/core/tests/data/oracles.json, which the core
oracle tests and the acceptance suite read. Rerun with --check to compare
the frozen file against a fresh evaluation."""

import json
import sys
from decimal import Decimal
from pathlib import Path

from mpmath import mp, mpf, exp, log, sqrt

mp.dps = 50


def softmax(z):
    m = max(z)
    e = [exp(x - m) for x in z]
    s = sum(e)
    return [x / s for x in e]


def surrogate(z, zfix, r, b):
    """-sum_a sg[pi(a)] (r(a) - b) ln pi_z(a): the expected REINFORCE loss
    with the sampling weights held fixed."""
    w = softmax(zfix)
    p = softmax(z)
    return -sum(w[a] * (r[a] - b) * log(p[a]) for a in range(len(z)))


def exact_grad(z, r, b, h=mpf("1e-20")):
    out = []
    for k in range(len(z)):
        zp = list(z); zp[k] += h
        zm = list(z); zm[k] -= h
        out.append((surrogate(zp, z, r, b) - surrogate(zm, z, r, b)) / (2 * h))
    return out


TABLE = {}


def show(name, v):
    TABLE[name] = float(v)


show("entropy_06_04", -(mpf("0.6") * log(mpf("0.6")) + mpf("0.4") * log(mpf("0.4"))))
show("entropy_uniform5", log(5))
show("density_3_of_5", sqrt(mpf(3) / 5))
show("prototype_norm_orthogonal", sqrt(2) / 2)
ws = [mpf(1), mpf("0.7"), mpf("0.49")]
for j, w in enumerate(ws):
    show(f"weight_{j + 1}", w / sum(ws))
show("singleton_r_step", sqrt(mpf(1) / 5))
show("length_excess_1_5", min(max(mpf(192) / 128 - 1, 0), 1))
show("answer_reward", mpf("0.6") ** 2 * (1 - mpf("0.1") * mpf("0.5")))
show("lambda_midpoint", mpf("0.7") * (mpf(20 + 75) - 20) / 150)
show("mixed_reward", mpf("0.3") * mpf("0.5") + mpf("0.7") * mpf("0.8"))
show("proposer_reward_h0", mpf("0.5") * exp(-(mpf("0.85") ** 2) / (2 * mpf("0.5") ** 2)))
show("log_prob_10_0_0", log(softmax([mpf(10), mpf(0), mpf(0)])[0]))
show("kl_09_01", mpf("0.9") * log(mpf("1.8")) + mpf("0.1") * log(mpf("0.2")))
show("adapt_beta", mpf("0.1") * exp(mpf("0.1")))
show("baseline", mpf("0.95") * mpf("0.5") + mpf("0.05") * mpf("0.7"))
show("loo_pair_cosine", 1 / sqrt(2))
show("profile_mean", 1 - (mpf(1) + 0 + mpf("0.5")) / 3)
TABLE["canonical_neg_half"] = str(Decimal("-0.50").normalize())

cases = [
    ([mpf("0.3"), mpf("-0.2")], [mpf("1.0"), mpf("0.25")], mpf("0.1")),
    ([mpf("0.3"), mpf("-0.2"), mpf("0.5")], [mpf("1.0"), mpf("0.2"), mpf("-0.4")], mpf("0.1")),
    ([mpf("1.5"), mpf("0"), mpf("-1"), mpf("0.25"), mpf("0.75")],
     [mpf("0.9"), mpf("0.1"), mpf("0.5"), mpf("-0.3"), mpf("0.0")], mpf("-0.2")),
]
for z, r, b in cases:
    TABLE.setdefault("gradients", []).append({
        "logits": [float(x) for x in z],
        "rewards": [float(x) for x in r],
        "baseline": float(b),
        "grad": [float(x) for x in exact_grad(z, r, b)],
    })

out = Path(__file__).resolve().parent.parent / "crates/core/tests/data/oracles.json"
text = json.dumps(TABLE, indent=2) + "\n"
if "--check" in sys.argv:
    sys.exit(0 if out.read_text() == text else "frozen oracle table is stale")
out.parent.mkdir(parents=True, exist_ok=True)
out.write_text(text)
