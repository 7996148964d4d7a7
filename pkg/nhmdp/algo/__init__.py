ROW_SUM_TOL = 1e-12  # kernel rows must sum to 1 within this, never renormalized
TIE_TOL = 1e-12  # greedy selectors take the lowest action index within this of the max
GOLDEN_ITERATIONS = 20  # interval flavor: refinement steps on the bracketing grid cell
CONTRACTION_WINDOW_PERIODS = 4  # windows of up to this many periods are scanned for a Δ-product < 1

# Theory conditions named in diagnostics
ERGODIC_WINDOW = "ergodic_window"
BOUNDED_RATIO = "bounded_ratio"
RISK_ERGODIC_WINDOW = "risk_ergodic_window"

CONDITION_DESCRIPTIONS = {
    ERGODIC_WINDOW: "Δ_n·…·Δ_{n+k} → 0, i.e. some window of stages has Dobrushin product < 1",
    BOUNDED_RATIO: "K_n = sup_B P_n^a(x,B) / P_n^a(x',B) < ∞",
    RISK_ERGODIC_WINDOW: "Δ_n^γ·…·Δ_{n+k}^γ → 0, i.e. the risk operators contract over some window",
}
