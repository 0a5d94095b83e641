"""Which flat singular sets are regular for sigma_ell?

A codimension-k set is regular when the model vector ``v_k`` lies inside the
cone, irregular when it lies outside, and borderline on the boundary.  The
classifier backs each verdict with a certificate: an exact level-set
solution for regular sets and a strict subsolution barrier for irregular
ones.  Run: ``python demos/regularity_thresholds.py``.
"""
from lnlab.cone import CurvatureFunction
from lnlab.regularity import REGULAR, IRREGULAR, classify, table_csv, threshold_table


def main():
    f = CurvatureFunction(9, 2)
    print("n = 9, sigma_2:")
    for k in range(1, 10):
        c = classify(f, k)
        if c.verdict == REGULAR:
            extra = f"model scale {c.scale:.6f}"
        elif c.verdict == IRREGULAR:
            extra = f"barrier margin {c.barrier.margin:.3e} (eps = {c.barrier.epsilon})"
        else:
            extra = "v_k on the cone boundary"
        print(f"  k={k}: {c.verdict:<10} {extra}")

    print("\nlargest regular codimension, n = 3..20")
    print(table_csv(threshold_table([1, 2], range(3, 21))), end="")


if __name__ == "__main__":
    main()
