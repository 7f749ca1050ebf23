"""One-off generator for the bundled benchmark CSVs and their manifest.

Hubble, Kepler and Bode are transcriptions of the classical tables. The
adsorption isotherms and the rough-pipe friction set are reconstructions:
deterministic samples of the literature model forms with small measurement
noise (the historical tables are not bundled with their papers in
machine-readable form). Provenance is recorded per dataset in manifest.json.
"""

import hashlib
import json
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "srloop" / "datasets"
OUT.mkdir(parents=True, exist_ok=True)


def write_csv(name, header, rows, fmt):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f(v) for f, v in zip(fmt, row)))
    (OUT / name).write_text("\n".join(lines) + "\n")


def plain(v):
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def dec(places):
    return lambda v: f"{v:.{places}f}"


# --- Hubble (1929): distance (Mpc) vs recession velocity (km/s), 24 nebulae
hubble = [
    (0.032, 170), (0.034, 290), (0.214, -130), (0.263, -70),
    (0.275, -185), (0.275, -220), (0.45, 200), (0.5, 290),
    (0.5, 270), (0.63, 200), (0.8, 300), (0.9, -30),
    (0.9, 650), (0.9, 150), (0.9, 500), (1.0, 920),
    (1.1, 450), (1.1, 500), (1.4, 500), (1.7, 960),
    (2.0, 500), (2.0, 850), (2.0, 800), (2.0, 1090),
]
write_csv("hubble.csv", ["x1", "y"], hubble, [plain, plain])

# --- Kepler: semi-major axis (AU) vs orbital period (days), classical six planets
kepler = [
    (0.389, 87.77),
    (0.724, 224.70),
    (1.0, 365.25),
    (1.524, 686.95),
    (5.2, 4332.62),
    (9.51, 10759.2),
]
write_csv("kepler.csv", ["x1", "y"], kepler, [plain, plain])

# --- Titius-Bode: planet index vs semi-major axis (AU); Ceres included, Neptune omitted
bode = [
    (1, 0.39), (2, 0.72), (3, 1.00), (4, 1.52), (5, 2.77),
    (6, 5.20), (7, 9.54), (8, 19.19), (9, 39.44),
]
write_csv("bode.csv", ["x1", "y"], bode, [plain, plain])

# --- Langmuir isotherm (reconstruction): q = qm*p/(K+p) with 0.5% noise
rng = np.random.default_rng(271828)
p = np.array([0.25, 0.5, 1.0, 1.75, 3.0, 5.0, 8.0, 12.0, 18.0, 27.0, 38.0, 50.0])
q = 3.8 * p / (4.2 + p) * (1 + 0.005 * rng.standard_normal(p.size))
write_csv("langmuir.csv", ["x1", "y"], list(zip(p, q)), [plain, dec(6)])

# --- Dual-site Langmuir (reconstruction): strong site + weak site, 0.4% range noise
rng = np.random.default_rng(314159)
p2 = np.geomspace(0.01, 60.0, 25)
y2 = 2.0 * p2 / (0.05 + p2) + 4.0 * p2 / (10.0 + p2)
y2 = y2 + 0.004 * (y2.max() - y2.min()) * rng.standard_normal(p2.size)
write_csv("dual_site_langmuir.csv", ["x1", "y"], list(zip(p2, y2)), [dec(6), dec(6)])

# --- Nikuradse rough-pipe friction (reconstruction): 6 relative roughnesses,
#     laminar branch + Blasius smooth law blending into the fully-rough plateau
rng = np.random.default_rng(193319)
rows = []
for rk in [15.0, 30.6, 60.0, 126.0, 252.0, 507.0]:
    lam_rough = (2.0 * np.log10(rk) + 1.74) ** -2
    re = np.geomspace(10**3.2, 10**5.95, 60)
    lam_laminar = 64.0 / re
    lam_smooth = 0.316 * re**-0.25
    re_t = max((0.316 / lam_rough) ** 4, 3.0e3)
    s = 1.0 / (1.0 + np.exp(-(np.log10(re) - np.log10(re_t)) / 0.18))
    dip = 0.10 * lam_rough * 4.0 * s * (1.0 - s)
    lam_turb = (1.0 - s) * lam_smooth + s * lam_rough - dip
    w = 1.0 / (1.0 + np.exp(-(np.log10(re) - np.log10(2.8e3)) / 0.04))
    lam = (1.0 - w) * lam_laminar + w * lam_turb
    lam = lam * (1 + 0.01 * rng.standard_normal(re.size))
    for r, l in zip(re, lam):
        rows.append((np.log10(r), rk, l))
write_csv("nikuradse.csv", ["x1", "x2", "y"], rows, [dec(5), plain, dec(6)])

# --- contexts (natural-language background handed to the model when enabled)
contexts = {
    "hubble": (
        "The data is about observational cosmology where the independent "
        "variable (x1) is the proper distance to a galaxy, and the dependent "
        "variable (y) is its radial recession velocity."
    ),
    "kepler": (
        "The data is about planetary motion in astrophysics where the "
        "independent variable (x1) is semi-major axis, and the dependent "
        "variable (y) is period in days."
    ),
    "bode": (
        "The data is about planetary motion in astrophysics where the "
        "independent variable (x1) is the index of a planet ordered by its "
        "distance from the Sun, and the dependent variable (y) is the "
        "semi-major axis of its orbit."
    ),
    "langmuir": (
        "The data is about isothermal gas adsorption on a uniform solid "
        "surface where the independent variable (x1) is pressure, and the "
        "dependent variable (y) is the amount of gas adsorbed at equilibrium."
    ),
    "dual_site_langmuir": (
        "The data is about isothermal gas adsorption on a solid surface with "
        "two distinct kinds of adsorption sites where the independent "
        "variable (x1) is pressure, and the dependent variable (y) is the "
        "amount of gas adsorbed at equilibrium."
    ),
    "nikuradse": (
        "The data is about turbulent friction in artificially roughened "
        "pipes where the independent variables are the base-10 logarithm of "
        "the Reynolds number (x1) and the relative roughness of the pipe "
        "(x2), and the dependent variable (y) is the friction factor."
    ),
}
for name, text in contexts.items():
    (OUT / f"{name}.context.txt").write_text(text + "\n")

# --- manifest with checksums, targets, per-dataset operator additions, provenance
meta = {
    "hubble": {
        "target": "c1*x1",
        "easy_extra_ops": [],
        "source": "Hubble (1929), PNAS 15, Table 1: 24 extra-galactic nebulae.",
    },
    "kepler": {
        "target": "c1*x1**(3/2)",
        "easy_extra_ops": ["sqrt"],
        "source": "Classical six-planet table: semi-major axis (AU) vs sidereal period (days).",
    },
    "bode": {
        "target": "c1*exp(c2*x1)+c3",
        "easy_extra_ops": ["^", "exp"],
        "source": "Titius-Bode: planet index vs observed semi-major axis (AU); Ceres included, Neptune omitted.",
    },
    "langmuir": {
        "target": "c1*x1/(c2+x1)",
        "easy_extra_ops": [],
        "source": "Reconstruction: single-site adsorption isotherm sampled from the Langmuir form with 0.5% noise.",
    },
    "dual_site_langmuir": {
        "target": "c1*x1/(c2+x1)+c3*x1/(c4+x1)",
        "easy_extra_ops": [],
        "source": "Reconstruction: two-site adsorption isotherm sampled from the dual-site Langmuir form with 0.4% noise.",
    },
    "nikuradse": {
        "target": None,
        "easy_extra_ops": ["^"],
        "source": "Reconstruction: rough-pipe friction factor over six relative roughnesses, laminar/smooth/fully-rough regimes with 1% noise.",
    },
}
manifest = {"datasets": {}, "reference_models": {}}
for name, info in meta.items():
    path = OUT / f"{name}.csv"
    data = path.read_bytes()
    n_rows = data.decode().count("\n") - 1
    header = data.decode().splitlines()[0].split(",")
    manifest["datasets"][name] = {
        "file": f"{name}.csv",
        "context_file": f"{name}.context.txt",
        "rows": n_rows,
        "variables": header[:-1],
        "sha256": hashlib.sha256(data).hexdigest(),
        "target": info["target"],
        "easy_extra_ops": info["easy_extra_ops"],
        "source": info["source"],
    }

# Published reference numbers for the rough-pipe comparison table (display
# anchors for reports, not reproduction targets).
manifest["reference_models"]["nikuradse"] = {
    "external": [
        {"name": "BMS", "mae": 0.00392, "complexity": 37},
        {"name": "EFS", "mae": 0.00941, "complexity": None},
        {"name": "GPT-4 best", "mae": 0.01086, "complexity": 41},
        {"name": "GPT-4o best", "mae": 0.00924, "complexity": 27},
    ],
    "prompt_table": [
        {"run": "P1S1", "mae": 0.02270419, "complexity": 13},
        {"run": "P1S2", "mae": 0.00978477, "complexity": 29},
        {"run": "P2S1", "mae": 0.00897093, "complexity": 69},
        {"run": "P2S2", "mae": 0.00931620, "complexity": 49},
        {"run": "P3S1", "mae": 0.01086397, "complexity": 41},
        {"run": "P3S2", "mae": 0.00992712, "complexity": 49},
        {"run": "P1S1o", "mae": 0.02007803, "complexity": 19},
        {"run": "P1S2o", "mae": 0.02141686, "complexity": 17},
        {"run": "P2S1o", "mae": 0.00954461, "complexity": 27},
        {"run": "P2S2o", "mae": 0.01186963, "complexity": 27},
        {"run": "P3S1o", "mae": 0.00923655, "complexity": 27},
        {"run": "P3S2o", "mae": 0.01144178, "complexity": 19},
    ],
}

(OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
print("wrote", sorted(p.name for p in OUT.iterdir()))
