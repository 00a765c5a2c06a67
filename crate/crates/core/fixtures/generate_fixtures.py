"""Regenerates the bundled CSV fixtures.

iris.csv and wine.csv are exported from the copies shipped with scikit-learn.
wine_quality.csv and acs_counties.csv are synthetic stand-ins with the
same shapes and column names as the original tables.
"""
import csv
import hashlib
import pathlib

import numpy as np
from sklearn.datasets import load_iris, load_wine

OUT = pathlib.Path(__file__).parent


def write(name, header, rows):
    path = OUT / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(name, hashlib.sha256(path.read_bytes()).hexdigest())


def export(loader, name):
    d = loader()
    names = [n.replace(" ", "_").replace("(", "").replace(")", "").replace("/", "_") for n in d.feature_names]
    rows = [[repr(float(v)) for v in x] + [d.target_names[t]] for x, t in zip(d.data, d.target)]
    write(name, names + ["class"], rows)


def wine_quality(rng):
    names = ["fixed_acidity", "volatile_acidity", "citric_acid", "residual_sugar", "chlorides",
             "free_sulfur_dioxide", "total_sulfur_dioxide", "density", "pH", "sulphates", "alcohol"]
    counts = {3: 10, 4: 53, 5: 681, 6: 638, 7: 199, 8: 18}
    base = np.array([8.3, 0.53, 0.27, 2.5, 0.087, 15.9, 46.5, 0.9967, 3.31, 0.66, 10.4])
    spread = np.array([1.7, 0.18, 0.19, 1.4, 0.047, 10.5, 32.9, 0.0019, 0.15, 0.17, 1.07])
    # quality mostly moves alcohol, volatile acidity and sulphates
    slope = np.array([0.1, -0.35, 0.2, 0.0, -0.1, -0.05, -0.2, -0.2, 0.0, 0.3, 0.55])
    skewed = {3, 4, 5, 6, 9}
    rows = []
    for q, n in counts.items():
        z = rng.standard_normal((n, len(names))) + slope * (q - 5.6)
        x = base + spread * z
        for j in skewed:
            x[:, j] = base[j] * np.exp(0.45 * z[:, j] - 0.1)
        x = np.maximum(x, 0.0)
        for row in x:
            rows.append([f"{v:.4g}" for v in row] + [str(q)])
    order = rng.permutation(len(rows))
    write("wine_quality.csv", names + ["quality"], [rows[i] for i in order])


def acs(rng):
    n, k = 3142, 4
    features = ["pct_white", "pct_black", "pct_hispanic", "pct_asian", "median_age", "median_income",
                "per_capita_income", "pct_poverty", "pct_unemployed", "pct_bachelors", "pct_no_hs",
                "pct_uninsured", "pct_public_assistance", "pct_owner_occupied", "median_home_value",
                "median_rent", "pct_vacant", "pct_rural", "mean_commute_min", "pct_veterans",
                "pct_disability"]
    cluster = rng.integers(0, k, n)
    centres = rng.normal(0.0, 1.2, (k, len(features)))
    z = centres[cluster] + rng.standard_normal((n, len(features)))
    scale = rng.uniform(2.0, 15.0, len(features))
    loc = rng.uniform(10.0, 60.0, len(features))
    feat = loc + scale * z
    population = np.exp(rng.normal(10.3, 1.4, n))
    diabetes = rng.normal(10.5, 2.5, n)
    obesity = 0.6 * diabetes + rng.normal(25.0, 3.0, n)
    age65 = rng.normal(18.5, 4.5, n)
    offsets = np.array([-1.7, -0.45, 0.7, 1.55])
    target = (20.0 + 1.5 * np.log(population) + 0.9 * diabetes + 0.35 * obesity
              + 0.45 * age65 + offsets[cluster] + rng.normal(0.0, 4.0, n))
    header = ["county_fips"] + features + ["population", "diabetes", "obesity", "pct_age_65_plus",
                                           "heart_failure_deaths", "planted_cluster"]
    rows = []
    for i in range(n):
        rows.append([f"{1001 + i:05d}"] + [f"{v:.3f}" for v in feat[i]]
                    + [f"{population[i]:.0f}", f"{diabetes[i]:.2f}", f"{obesity[i]:.2f}",
                       f"{age65[i]:.2f}", f"{target[i]:.3f}", str(cluster[i])])
    write("acs_counties.csv", header, rows)


if __name__ == "__main__":
    export(load_iris, "iris.csv")
    export(load_wine, "wine.csv")
    rng = np.random.default_rng(20240521)
    wine_quality(rng)
    acs(rng)
