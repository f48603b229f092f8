"""Quick end-to-end check of the compiled extension module."""

import math

import idim


def main():
    mus = idim.pareto_ratios(5000, 3.0, seed=7)
    fit = idim.twonn(mus=mus, c_trimmed=0.0)
    assert fit.method == "mle"
    assert fit.lower < fit.estimate < fit.upper
    assert abs(fit.estimate - 3.0) < 0.2, fit

    bayes = idim.twonn(mus=mus, method="bayes", c_trimmed=0.0)
    shape, rate, mean, median, mode = bayes.posterior
    s = sum(math.log(m) for m in mus)
    assert math.isclose(mean, (0.001 + len(mus)) / (0.001 + s), rel_tol=1e-12)
    assert bayes.lower <= mode <= median <= mean <= bayes.upper

    roll = idim.generate("swissroll", 400, seed=3)
    assert len(roll["x"]) == 400 and roll["columns"] == ["x", "y", "z"]
    lin = idim.twonn(x=roll["x"], method="linfit")
    assert 1.5 < lin.estimate < 2.6, lin

    dup = idim.compute_mus(x=[[1, 1], [1, 1], [2, 2], [2, 2], [3, 5]], q=1)
    assert dup["removed_duplicates"] == 2 and len(dup["mus"]) == 3

    try:
        idim.twonn(mus=mus, method="bayes", alpha=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha outside (0, 1) was accepted")

    gm = idim.generate("gaussmix", 60, seed=2)
    fit = idim.hidalgo(
        x=gm["x"], k=5, prior="truncated-pointmass", nominal_dim=5,
        nsim=200, burn_in=200, thinning=2, seed=4,
    )
    draws = fit.id_raw
    assert len(draws) == 100 and len(fit.membership_labels[0]) == 180
    assert max(max(row) for row in draws) <= 5.0
    summary = fit.summarize(k_clusters=3)
    assert len(summary["psm"]) == 180 and set(summary["clusters"]) <= {1, 2, 3}
    classes = [gm["class"][r] for r in fit.kept_rows]
    table = fit.id_by_class(classes)
    assert [row["class"] for row in table] == ["A", "B", "C"]
    assert table[0]["mean"] < table[2]["mean"]

    print("idim", idim.__version__, "smoke test passed")
    for row in table:
        print(f"  class {row['class']}: mean id {row['mean']:.3f}")


if __name__ == "__main__":
    main()
