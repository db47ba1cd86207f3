"""Regenerate cox_parity_*.csv with statsmodels PHReg (Breslow ties) as the reference fit."""
import numpy as np
from statsmodels.duration.hazard_regression import PHReg

rng = np.random.default_rng(7)
data_rows, beta_rows = [], []
for k in range(20):
    n = int(rng.integers(40, 200))
    p = int(rng.integers(1, 4))
    x = rng.normal(size=(n, p))
    if k % 3 == 0:
        x[:, 0] = rng.integers(0, 2, size=n)
    beta = rng.normal(scale=0.7, size=p)
    t = rng.exponential(size=n) / np.exp(x @ beta)
    c = rng.exponential(scale=2.0 * np.median(t), size=n)
    y = np.minimum(t, c)
    d = (t <= c).astype(int)
    assert len(np.unique(y)) == n
    model = PHReg(y, x, status=d, ties="breslow")
    b = model.fit(method="newton", maxiter=200).params
    for _ in range(5):
        b = b - np.linalg.solve(model.hessian(b), model.score(b))
    assert np.max(np.abs(model.score(b))) < 1e-10
    for i in range(n):
        cols = list(x[i]) + [0.0] * (3 - p)
        data_rows.append(f"{k},{p},{float(y[i])!r},{d[i]}," + ",".join(repr(float(v)) for v in cols))
    beta_rows.append(f"{k},{p}," + ",".join(repr(float(v)) for v in list(b) + [0.0] * (3 - p)))

with open("cox_parity_data.csv", "w") as f:
    f.write("dataset,p,time,event,x1,x2,x3\n" + "\n".join(data_rows) + "\n")
with open("cox_parity_beta.csv", "w") as f:
    f.write("dataset,p,b1,b2,b3\n" + "\n".join(beta_rows) + "\n")
