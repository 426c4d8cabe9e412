"""
Rolling one-step forecasts
==========================

Orders are chosen on the first 80% of the data; each later point is then
forecast from a standardized window of the preceding rows.
"""

from micvar import ForecastProtocol, build_process, evaluate, simulate

coef, noise = build_process("VAR2_2", "nondiag", process_seed=0)
series = simulate(coef, noise, n=600, seed=3)

report = evaluate(series, ForecastProtocol(p_max=6))
print("window size T1 =", report.T1)
for name, r in report.results.items():
    print(f"{name:4s} order {r.order}  wMSFE {r.wmsfe:.3f}")
