"""Stage assignment, marginal-likelihood scoring, and greedy clustering."""

import math
import random

import pytest

from cegforge import (
    StageModel,
    UnknownNameError,
    ValidationError,
    assign_stages,
    create_event_tree,
    initial_staging,
    load_csv,
    log_marginal_stage,
    merge_score,
    palette_colours,
    run_ahc,
    summarize_staging,
)
from cegforge.dataset import Dataset


def _sequential_log_marginal(prior, sequence) -> float:
    """Predictive-product form: multiply one-step posterior predictives."""
    alpha = list(prior)
    total = float(sum(alpha))
    out = 0.0
    for idx in sequence:
        out += math.log(alpha[idx] / total)
        alpha[idx] += 1.0
        total += 1.0
    return out


def _counts_to_sequence(counts, rng: random.Random):
    seq = [i for i, c in enumerate(counts) for _ in range(c)]
    rng.shuffle(seq)
    return seq


def test_log_marginal_matches_sequential_oracle():
    rng = random.Random(2024)
    for _ in range(150):
        k = rng.randint(2, 5)
        prior = [rng.choice([0.5, 1.0, 2.0, 5.0]) for _ in range(k)]
        counts = [rng.randint(0, 30) for _ in range(k)]
        want = _sequential_log_marginal(prior, _counts_to_sequence(counts, rng))
        got = log_marginal_stage(prior, counts)
        assert got == pytest.approx(want, abs=1e-8)


def test_log_marginal_is_order_invariant():
    rng = random.Random(7)
    prior = [2.0, 1.0, 3.0]
    counts = [4, 9, 2]
    reference = log_marginal_stage(prior, counts)
    for _ in range(10):
        seq = _counts_to_sequence(counts, rng)
        assert _sequential_log_marginal(prior, seq) == pytest.approx(
            reference, abs=1e-10
        )


def test_log_marginal_input_validation():
    with pytest.raises(ValidationError):
        log_marginal_stage([1.0, 0.0], [1, 1])
    with pytest.raises(ValidationError):
        log_marginal_stage([1.0, 1.0], [1, -1])
    with pytest.raises(ValidationError):
        log_marginal_stage([1.0, 1.0], [1.5, 1])
    with pytest.raises(ValidationError):
        log_marginal_stage([1.0, 1.0, 1.0], [1, 1])
    with pytest.raises(ValidationError):
        log_marginal_stage([2.0], [3])


def test_stage_model_moments_and_ess():
    sm = StageModel("u1", ("s0",), ("a", "b"), (2.0, 6.0), (3, 1))
    assert sm.posterior == (5.0, 7.0)
    assert sm.prior_mean == (0.25, 0.75)
    assert sm.posterior_mean == pytest.approx((5 / 12, 7 / 12))
    assert sm.ess == 12.0
    assert sm.theta == sm.posterior_mean


def test_stage_model_single_edge_scores_zero():
    sm = StageModel("u1", ("s4",), ("only",), (3.0,), (7,))
    assert sm.log_score() == 0.0


def test_merge_score_is_joint_minus_parts():
    a = StageModel("x", ("s1",), ("l", "r"), (1.0, 1.0), (8, 2))
    b = StageModel("y", ("s2",), ("l", "r"), (1.0, 1.0), (7, 3))
    joint = log_marginal_stage((2.0, 2.0), (15, 5))
    expect = joint - a.log_score() - b.log_score()
    assert merge_score(a, b) == pytest.approx(expect, abs=1e-12)
    assert merge_score(a, b) == pytest.approx(merge_score(b, a), abs=1e-12)


def test_merge_score_label_mismatch():
    a = StageModel("x", ("s1",), ("l", "r"), (1.0, 1.0), (1, 1))
    b = StageModel("y", ("s2",), ("u", "d"), (1.0, 1.0), (1, 1))
    with pytest.raises(ValidationError):
        merge_score(a, b)


def test_similar_stages_prefer_merging():
    alike = merge_score(
        StageModel("x", ("s1",), ("l", "r"), (1.0, 1.0), (40, 10)),
        StageModel("y", ("s2",), ("l", "r"), (1.0, 1.0), (38, 12)),
    )
    unlike = merge_score(
        StageModel("x", ("s1",), ("l", "r"), (1.0, 1.0), (40, 10)),
        StageModel("y", ("s2",), ("l", "r"), (1.0, 1.0), (5, 45)),
    )
    assert alike > 0 > unlike


# ---------------------------------------------------------------------------
# Manual stage assignment


def test_initial_staging_covers_only_root(toy_tree):
    staging = initial_staging(toy_tree)
    assert staging.stage_of("s0") == "g0"
    assert staging.colour_of("s0") == "#FFFFFF"
    assert staging.unassigned(toy_tree) == tuple(f"s{i}" for i in range(1, 10))
    assert not staging.is_complete(toy_tree)


def test_assign_stages_basic(toy_tree):
    staging = assign_stages(
        toy_tree,
        initial_staging(toy_tree),
        [["s1", "s2"], ["s4", "s6"]],
        ["#112233", "#445566"],
    )
    g12 = staging.stage_of("s1")
    assert staging.stage_of("s2") == g12
    assert staging.colour_of("s1") == "#112233"
    assert g12 in staging.frozen_stages
    assert staging.members(g12) == ("s1", "s2")
    assert staging.stage_of("s3") is None


def test_assign_stages_auto_palette_avoids_collisions(toy_tree):
    staging = assign_stages(
        toy_tree, initial_staging(toy_tree), [["s1"], ["s2"], ["s3"]]
    )
    used = [staging.colour_of(f"s{i}") for i in (1, 2, 3)]
    assert len(set(used)) == 3
    assert "#FFFFFF" not in used


def test_assign_stages_join_existing_colour(toy_tree):
    first = assign_stages(
        toy_tree, initial_staging(toy_tree), [["s1"]], ["#AA0000"]
    )
    joined = assign_stages(toy_tree, first, [["s2"]], ["#AA0000"])
    assert joined.stage_of("s2") == joined.stage_of("s1")


def test_assign_stages_reassignment_drops_empty_stage(toy_tree):
    first = assign_stages(
        toy_tree, initial_staging(toy_tree), [["s4"]], ["#AA0000"]
    )
    old = first.stage_of("s4")
    moved = assign_stages(toy_tree, first, [["s4", "s6"]], ["#00AA00"])
    assert moved.stage_of("s4") == moved.stage_of("s6")
    assert old not in moved.stage_colours


def test_assign_stages_validation(toy_tree):
    base = initial_staging(toy_tree)
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [])
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s10"]])  # leaf
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s1"], ["s1"]])  # duplicate id
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s1", "s4"]])  # different levels
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s1"], ["s2"]], ["#AA0000"])  # count
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s1"], ["s2"]], ["#AA0000", "#AA0000"])
    with pytest.raises(ValidationError):
        assign_stages(toy_tree, base, [["s1"]], ["#FFFFFF"])  # reserved
    with pytest.raises(UnknownNameError):
        assign_stages(toy_tree, base, [["s77"]])


def test_assign_stages_rejects_mixed_labels_after_deletion(toy_tree):
    from cegforge import delete_nodes

    trimmed = delete_nodes(toy_tree, ["s10"])  # s4 keeps only its "yes" edge
    with pytest.raises(ValidationError):
        assign_stages(trimmed, initial_staging(trimmed), [["s4", "s6"]])


def test_palette_colours_distinct_and_deterministic():
    first = palette_colours(6)
    assert len(set(first)) == 6
    assert palette_colours(6) == first
    shifted = palette_colours(3, used={first[0]})
    assert first[0] not in shifted


# ---------------------------------------------------------------------------
# AHC


def _small_random_frame(rng: random.Random) -> Dataset:
    cards = [rng.randint(2, 3), rng.randint(2, 3)]
    rows = tuple(
        (f"a{rng.randrange(cards[0])}", f"b{rng.randrange(cards[1])}")
        for _ in range(rng.randint(30, 80))
    )
    return Dataset(column_names=("first", "second"), rows=rows)


def test_ahc_completes_every_staging():
    rng = random.Random(11)
    for _ in range(20):
        tree = create_event_tree(_small_random_frame(rng))
        staging = run_ahc(tree, initial_staging(tree))
        assert staging.is_complete(tree)


def test_ahc_is_deterministic(toy_tree):
    a = run_ahc(toy_tree, initial_staging(toy_tree))
    b = run_ahc(toy_tree, initial_staging(toy_tree))
    assert a.stages() == b.stages()


def test_ahc_never_touches_frozen_stages(toy_tree):
    manual = assign_stages(
        toy_tree, initial_staging(toy_tree), [["s4", "s8"]], ["#123456"]
    )
    done = run_ahc(toy_tree, manual)
    frozen = done.stage_for_colour("#123456")
    assert frozen is not None
    assert done.members(frozen) == ("s4", "s8")
    assert frozen in done.frozen_stages
    assert done.is_complete(toy_tree)


def test_ahc_trace_logbf_positive_and_additive(toy_tree):
    trace: list = []
    run_ahc(toy_tree, initial_staging(toy_tree), trace=trace)
    for record in trace:
        assert record["logbf"] > 0
        merged_a, merged_b = record["merged"]
        pool = record["stages"]
        assert tuple(merged_a) in pool and tuple(merged_b) in pool


def test_ahc_only_merges_same_level_same_labels():
    rng = random.Random(5150)
    for _ in range(10):
        tree = create_event_tree(_small_random_frame(rng))
        staging = run_ahc(tree, initial_staging(tree))
        for members in staging.stages().values():
            levels = {tree.vertex(m).level for m in members}
            labels = {tree.out_labels(m) for m in members}
            assert len(levels) == 1 and len(labels) == 1


def test_ahc_accepts_per_situation_priors(toy_tree):
    priors = {f"s{i}": [1.0, 1.0] for i in range(4, 10)}
    priors["s0"] = [1.0, 1.0, 1.0]
    staging = run_ahc(toy_tree, initial_staging(toy_tree), priors=priors)
    assert staging.is_complete(toy_tree)
    with pytest.raises(ValidationError):
        run_ahc(toy_tree, initial_staging(toy_tree), priors={"s1": [1.0, 1.0, 1.0]})


def test_ahc_merges_identical_count_pattern():
    # two situations with the same outgoing counts should end up together
    rows = []
    for a in ("x", "y"):
        rows += [(a, "l")] * 20 + [(a, "r")] * 5
    frame = Dataset(column_names=("p", "q"), rows=tuple(rows))
    tree = create_event_tree(frame)
    staging = run_ahc(tree, initial_staging(tree))
    assert staging.stage_of("s1") == staging.stage_of("s2")


# ---------------------------------------------------------------------------
# Summary of a (possibly partial) staging


def test_staging_summary_counts(toy_tree):
    staging = assign_stages(
        toy_tree, initial_staging(toy_tree), [["s1", "s2"]], ["#AA0000"]
    )
    summary = summarize_staging(toy_tree, staging)
    assert summary.total_nodes == 22
    assert summary.total_edges == 21
    # staged: root + s1 + s2, unstaged situations: 7 of s3..s9
    assert summary.left_to_colour == 7
    assert summary.colour_counts["#AA0000"] == 2
    assert summary.colour_counts["#FFFFFF"] == 20


def test_staging_summary_block_for_worked_colouring(homicide_data):
    tree = create_event_tree(homicide_data, [1, 2, 3, 4])
    groups = [
        ["s13", "s21"],
        ["s5", "s9"],
        ["s17"],
        ["s25"],
        ["s6", "s8", "s10"],
        ["s12"],
        ["s2"],
        ["s4"],
    ]
    colours = [
        "#92DCE5",
        "#C5D86D",
        "#F2DC5D",
        "#388697",
        "#FE5F55",
        "#FFAA00",
        "#A9E5BB",
        "#E79C9C",
    ]
    staging = assign_stages(tree, initial_staging(tree), groups, colours)
    text = summarize_staging(tree, staging).format()
    assert text == (
        "Summary of Staged Tree Object\n"
        "=============================\n"
        "Total nodes: 61\n"
        "Total edges: 60\n"
        "Nodes left to be coloured: 16\n"
        "\n"
        "Node colour counts:\n"
        "#388697 (1 node)\n"
        "#92DCE5 (2 nodes)\n"
        "#A9E5BB (1 node)\n"
        "#C5D86D (2 nodes)\n"
        "#E79C9C (1 node)\n"
        "#F2DC5D (1 node)\n"
        "#FE5F55 (3 nodes)\n"
        "#FFAA00 (1 node)\n"
        "#FFFFFF (49 nodes)\n"
    )


def test_mixed_manual_and_ahc_flow(homicide_data):
    tree = create_event_tree(homicide_data, [1, 2, 3, 4])
    staging = assign_stages(
        tree, initial_staging(tree), [["s13", "s21"], ["s5", "s9"]]
    )
    done = run_ahc(tree, staging)
    assert done.is_complete(tree)
    assert summarize_staging(tree, done).left_to_colour == 0
