"""
The population loss is flat past the true order
===============================================

For a stable VAR(p0) the best linear one-step predictor using p lags stops
improving once p reaches p0, and its squared error settles at Tr(Sigma).
"""

import numpy as np

from micvar import VarCoefficients, population_loss_curve

# AR(2) with coefficients (0.3, 0.1) and unit noise variance
coef = VarCoefficients.univariate([0.3, 0.1])
curve = population_loss_curve(coef, np.eye(1), p_max=10)
for p, loss in enumerate(curve.losses):
    print(f"p={p:2d}  L(p)={loss:.6f}")

# the largest penalty slope that still recovers p0 from these losses
print("M =", curve.oracle_window)

# a bivariate VAR(2) with correlated noise behaves the same way
coef = VarCoefficients((np.array([[0.4, 0.1], [0.0, 0.3]]), np.array([[-0.2, 0.0], [0.1, 0.1]])))
sigma = np.array([[1.0, 0.4], [0.4, 2.0]])
curve = population_loss_curve(coef, sigma, p_max=6)
print(np.round(curve.losses, 6), "trace of Sigma:", np.trace(sigma))
