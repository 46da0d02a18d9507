"""Regenerate the parser corpora under tests/data.

golden/NNN.qmp       hand-style input (comments, omitted defaults, odd spacing, CRLF)
golden/NNN.canonical expected canonical text, formatted here without the package
bad/<CODE>.qmp       minimal input whose diagnostics must include CODE

Run from anywhere: ``python3 tests/data/make_corpus.py``.
"""

import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
N_GOLDEN = 50


def g(x):
    return format(float(x), ".17g")


def c(z):
    return f"({g(z.real)},{g(z.imag)})"


def state(rng):
    t = rng.uniform(0.05, math.pi / 2 - 0.05)
    phi = rng.choice([0.0, 0.0, rng.uniform(-math.pi, math.pi)])
    return complex(math.cos(t)), complex(math.sin(t) * math.cos(phi), math.sin(t) * math.sin(phi))


def loose(z, rng):
    """Input spelling of a complex number that parses to exactly ``z``."""
    re_, im = g(z.real), g(z.imag)
    if z.imag == 0 and rng.random() < 0.5:
        im = rng.choice(["0", "0.0", "+0", "0e0"])
    sep = rng.choice([",", ", ", " ,"])
    return f"({re_}{sep}{im})"


def golden(k, rng):
    kind = ("wv", "nwv", "pointer")[k % 3]
    pre, post = state(rng), state(rng)
    lines_in, canon = [], []
    if rng.random() < 0.4:
        lines_in.append(f"# golden case {k}")
    lines_in.append(f"protocol {kind}")
    canon.append(f"protocol {kind}")
    body = [f"preselect {loose(pre[0], rng)} {loose(pre[1], rng)}"]
    canon.append(f"preselect {c(pre[0])} {c(pre[1])}")

    if kind == "wv":
        eps = round(rng.uniform(0.01, 0.5), 4)
        if rng.random() < 0.5:
            theta = math.pi / 4
            body.append(f"detector eps={eps}")
        else:
            theta = round(rng.uniform(0.2, 1.3), 3)
            body.append(f"detector eps={eps}   theta={theta}")
        canon.append(f"detector theta={g(theta)} eps={g(eps)}")
    elif kind == "nwv":
        if rng.random() < 0.3:
            gamma, t = round(rng.uniform(0.1, 3), 3), round(rng.uniform(0.01, 0.5), 3)
            body.append(f"collapse t={t} gamma={gamma}")
            canon.append(f"collapse gamma={g(gamma)} t={g(t)}")
        else:
            p1 = round(rng.uniform(0.01, 0.9), 4)
            if rng.random() < 0.5:
                body.append(f"collapse p1={p1}")
            else:
                body.append(f"collapse p0=0 p1={p1}")
            canon.append(f"collapse p1={g(p1)} p0=0")
    else:
        lam = rng.choice([0.01, 0.1, 0.5, -0.2, 2.0])
        q0, delta = rng.choice([(0.0, 1.0), (1.5, 1.0), (-2.0, 0.5), (0.0, 2.0)])
        parts = [f"lambda={lam}"]
        if q0 != 0.0 or rng.random() < 0.5:
            parts.append(f"q0={q0}")
        if delta != 1.0 or rng.random() < 0.5:
            parts.append(f"delta={delta}")
        rng.shuffle(parts)
        body.append("pointer " + " ".join(parts))
        canon.append(f"pointer lambda={g(lam)} q0={g(q0)} delta={g(delta)}")

    retain = "noclick" if kind == "nwv" else rng.choice(["click", "noclick", None])
    tail = f" retain={retain}" if retain else ""
    body.append(f"postselect {loose(post[0], rng)} {loose(post[1], rng)}{tail}")
    canon.append(f"postselect {c(post[0])} {c(post[1])} retain={retain or 'click'}")

    if kind != "pointer" and rng.random() < 0.7:
        trials, seed = rng.choice([1000, 100000, 10**6]), rng.randrange(0, 2**32)
        if rng.random() < 0.5:
            body.append(f"run trials={trials} seed={seed}  # default shards")
            canon.append(f"run trials={trials} seed={seed} shards=1")
        else:
            shards = rng.choice([2, 4, 8])
            body.append(f"run seed={seed} shards={shards} trials={trials}")
            canon.append(f"run trials={trials} seed={seed} shards={shards}")

    # protocol must come first only by convention; shuffle the rest sometimes
    if rng.random() < 0.3:
        rng.shuffle(body)
    for line in body:
        if rng.random() < 0.2:
            lines_in.append("")
        indent = rng.choice(["", "", "  ", "\t"])
        lines_in.append(indent + line)
    eol = "\r\n" if rng.random() < 0.2 else "\n"
    return eol.join(lines_in) + eol, "\n".join(canon) + "\n"


VALID_WV = ["protocol wv", "preselect (0.6,0) (0.8,0)", "detector eps=0.2", "postselect (0.6,0) (0.8,0)"]
VALID_NWV = ["protocol nwv", "preselect (0.6,0) (0.8,0)", "collapse p1=0.25",
             "postselect (0.6,0) (0.8,0) retain=noclick"]


def replace(lines, idx, new):
    out = list(lines)
    out[idx] = new
    return out


BAD = {
    "SYNTAX": replace(VALID_WV, 1, "preselect (0.6,0 (0.8,0"),
    "UNKNOWN_DIRECTIVE": VALID_WV + ["measure everything"],
    "DUPLICATE_STAGE": VALID_WV + ["preselect (1,0) (0,0)"],
    "MISSING_STAGE": VALID_WV[:3],
    "BAD_KIND": replace(VALID_WV, 0, "protocol strong"),
    "BAD_NUMBER": replace(VALID_WV, 2, "detector eps=0.2.1"),
    "BAD_ARITY": replace(VALID_WV, 1, "preselect (1,0)"),
    "UNKNOWN_KEY": replace(VALID_WV, 2, "detector eps=0.2 phi=1"),
    "MISSING_KEY": replace(VALID_WV, 2, "detector theta=0.7"),
    "DUPLICATE_KEY": replace(VALID_WV, 2, "detector eps=0.2 eps=0.3"),
    "CONFLICTING_KEYS": replace(VALID_NWV, 2, "collapse p1=0.2 gamma=1 t=0.1"),
    "PROB_RANGE": replace(VALID_NWV, 2, "collapse p1=1.5"),
    "VALUE_RANGE": VALID_WV + ["run trials=0 seed=1"],
    "NORM_ERROR": replace(VALID_WV, 1, "preselect (1,0) (1,0)"),
    "BAD_RETAIN": replace(VALID_WV, 3, "postselect (0.6,0) (0.8,0) retain=sometimes"),
    "MISSING_RETAIN": replace(VALID_NWV, 3, "postselect (0.6,0) (0.8,0)"),
    "KIND_STAGE_MISMATCH": replace(VALID_WV, 2, "collapse p1=0.1"),
    "RETAIN_CONVENTION": replace(VALID_NWV, 3, "postselect (0.6,0) (0.8,0) retain=click"),
    "ZERO_STRENGTH": replace(VALID_WV, 2, "detector eps=0"),
    "POINTER_GRID": ["protocol pointer", "preselect (1,0) (0,0)", "pointer lambda=500 delta=0.05",
                     "postselect (1,0) (0,0)"],
    "W_NORMALIZED": replace(VALID_WV, 1, "preselect (0.6,0) (0.80001,0)"),
    "W_DIVERGENT": replace(VALID_WV, 3, "postselect (0.8,0) (-0.6,0)"),
    "W_P0_NONZERO": replace(VALID_NWV, 2, "collapse p1=0.25 p0=0.01"),
}


def main():
    gdir, bdir = HERE / "golden", HERE / "bad"
    gdir.mkdir(exist_ok=True)
    bdir.mkdir(exist_ok=True)
    rng = random.Random(20240611)
    for k in range(N_GOLDEN):
        src, canon = golden(k, rng)
        (gdir / f"{k:03d}.qmp").write_bytes(src.encode())
        (gdir / f"{k:03d}.canonical").write_bytes(canon.encode())
    for code, lines in BAD.items():
        text = f"# expect: {code}\n" + "\n".join(lines) + "\n"
        (bdir / f"{code}.qmp").write_bytes(text.encode())
    (bdir / "ENCODING.qmp").write_bytes(b"# expect: ENCODING\nprotocol wv\xff\n")


if __name__ == "__main__":
    main()
