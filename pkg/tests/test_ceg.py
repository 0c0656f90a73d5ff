"""Posterior updating, tree-to-graph contraction, reduction, and scoring."""

import random

import pytest

from cegforge import (
    CEGModel,
    ModelSummary,
    SINK_ID,
    UnknownNameError,
    ValidationError,
    compare_ceg_models,
    contract_to_ceg,
    create_event_tree,
    initial_staging,
    posterior_update,
    run_ahc,
    specify_priors,
    staged_tree_prior,
    summarize_ceg,
    summarize_stage_models,
    update_table,
)
from cegforge.ceg import SummaryRow
from cegforge.dataset import Dataset
from cegforge.staging import StageModel


@pytest.fixture()
def toy_model(toy_tree, toy_staging):
    priors = specify_priors(toy_tree, toy_staging, "uniform")
    return staged_tree_prior(toy_tree, toy_staging, priors)


@pytest.fixture()
def toy_ceg(toy_model):
    return contract_to_ceg(posterior_update(toy_model))


def _stage_data(model, members):
    for sm in model.stage_models:
        if sm.members == members:
            return sm.data
    raise AssertionError(f"no stage with members {members}")


def test_posterior_update_sums_member_counts(toy_model):
    updated = posterior_update(toy_model)
    assert _stage_data(updated, ("s0",)) == (3, 3, 2)
    # blunt and knife each split (2 female, 1 male)
    assert _stage_data(updated, ("s1", "s2")) == (4, 2)
    assert _stage_data(updated, ("s3",)) == (0, 2)
    assert _stage_data(updated, ("s4", "s6")) == (2, 2)
    assert _stage_data(updated, ("s5", "s7")) == (0, 2)
    assert _stage_data(updated, ("s8",)) == (0, 0)
    assert _stage_data(updated, ("s9",)) == (1, 1)


def test_posterior_update_override_counts(toy_model):
    updated = posterior_update(toy_model, counts={"u1": [5, 6, 7]})
    assert _stage_data(updated, ("s0",)) == (5, 6, 7)
    with pytest.raises(ValidationError):
        posterior_update(toy_model, counts={"u1": [5, 6]})


def test_posterior_is_prior_plus_data(toy_model):
    updated = posterior_update(toy_model)
    for sm in updated.stage_models:
        assert sm.posterior == tuple(
            a + y for a, y in zip(sm.prior, sm.data)
        )


# ---------------------------------------------------------------------------
# Contraction


def test_contraction_merges_equivalent_situations(toy_ceg):
    by_id = {p.id: p for p in toy_ceg.positions}
    assert by_id["w0"].members == ("s0",)
    # s1 and s2 share a stage and unfold identically, so they merge
    assert by_id["w1"].members == ("s1", "s2")
    assert by_id["w2"].members == ("s3",)
    assert by_id["w3"].members == ("s4", "s6")
    assert by_id["w4"].members == ("s5", "s7")
    assert by_id["w5"].members == ("s8",)
    assert by_id["w6"].members == ("s9",)
    assert len(toy_ceg.positions) == 7
    assert toy_ceg.sink_members == tuple(f"s{i}" for i in range(10, 22))


def test_contraction_keeps_parallel_edges(toy_ceg):
    into_w1 = toy_ceg.incoming("w1")
    assert sorted(e.label for e in into_w1) == ["blunt", "knife"]
    assert all(e.source == "w0" for e in into_w1)
    assert len(toy_ceg.edges) == 15


def test_contraction_edges_point_to_sink_from_last_level(toy_ceg):
    last = [e for e in toy_ceg.edges if e.target == SINK_ID]
    assert len(last) == 8
    assert {e.source for e in last} == {"w3", "w4", "w5", "w6"}


def test_singleton_staging_merges_nothing(toy_tree):
    from cegforge import assign_stages

    singleton = assign_stages(
        toy_tree,
        initial_staging(toy_tree),
        [[f"s{i}"] for i in range(1, 10)],
    )
    priors = specify_priors(toy_tree, singleton, "uniform")
    ceg = contract_to_ceg(posterior_update(staged_tree_prior(toy_tree, singleton, priors)))
    assert all(len(p.members) == 1 for p in ceg.positions)
    assert len(ceg.positions) == 10


def test_same_stage_insufficient_when_subtrees_differ(toy_tree):
    from cegforge import assign_stages

    # s1, s2 share a stage but their children land in different stages,
    # so the florets differ and the positions must stay apart
    staging = assign_stages(
        toy_tree,
        initial_staging(toy_tree),
        [["s1", "s2"], ["s3"], ["s4"], ["s6"], ["s5", "s7"], ["s8"], ["s9"]],
    )
    priors = specify_priors(toy_tree, staging, "uniform")
    ceg = contract_to_ceg(posterior_update(staged_tree_prior(toy_tree, staging, priors)))
    members = {p.members for p in ceg.positions}
    assert ("s1",) in members and ("s2",) in members
    assert ("s1", "s2") not in members


def test_contraction_label_mode_controls_edge_values(toy_model):
    updated = posterior_update(toy_model)
    ceg = contract_to_ceg(updated, label_mode="posterior_mean")
    root_edges = ceg.outgoing("w0")
    sm = ceg.stage_model("u1")
    for e in root_edges:
        assert ceg.edge_value(e) == pytest.approx(sm.posterior_mean[e.param_index])
    bare = contract_to_ceg(updated, label_mode="none")
    assert bare.edge_value(bare.outgoing("w0")[0]) is None
    with pytest.raises(ValidationError):
        contract_to_ceg(updated, label_mode="percentages")


def _random_model(rng: random.Random):
    cards = [rng.randint(2, 3) for _ in range(rng.randint(2, 3))]
    rows = tuple(
        tuple(f"v{rng.randrange(cards[i])}" for i in range(len(cards)))
        for _ in range(rng.randint(40, 120))
    )
    frame = Dataset(
        column_names=tuple(f"c{i}" for i in range(len(cards))), rows=rows
    )
    tree = create_event_tree(frame)
    staging = run_ahc(tree, initial_staging(tree))
    priors = specify_priors(tree, staging, "uniform")
    return tree, posterior_update(staged_tree_prior(tree, staging, priors))


def test_contraction_preserves_path_sets():
    rng = random.Random(6021)
    for _ in range(30):
        tree, model = _random_model(rng)
        ceg = contract_to_ceg(model)
        tree_paths = set(tree.root_to_leaf_paths())
        ceg_paths = {tuple(e.label for e in path) for path in ceg.paths()}
        assert ceg_paths == tree_paths
        assert len(ceg.paths()) == len(tree.root_to_leaf_paths())


def test_contraction_preserves_path_probabilities():
    # each root-to-leaf probability must survive the merge untouched
    rng = random.Random(88)
    for _ in range(10):
        tree, model = _random_model(rng)
        stage_of = {m: sm for sm in model.stage_models for m in sm.members}
        want: dict[tuple, float] = {}
        for leaf in tree.leaves():
            prob = 1.0
            vertex = tree.root.id
            for label in leaf.path:
                sm = stage_of[vertex]
                prob *= sm.posterior_mean[sm.labels.index(label)]
                vertex = next(
                    e.child for e in tree.children(vertex) if e.label == label
                )
            want[leaf.path] = prob
        ceg = contract_to_ceg(model)
        for path in ceg.paths():
            labels = tuple(e.label for e in path)
            prob = 1.0
            for e in path:
                prob *= ceg.edge_value(e)
            assert prob == pytest.approx(want[labels], abs=1e-12)


# ---------------------------------------------------------------------------
# Reduction


def test_reduced_ceg_keeps_only_matching_paths(toy_ceg):
    from cegforge import create_reduced_ceg

    reduced = create_reduced_ceg(toy_ceg, ["blunt"])
    assert reduced.reduced_by == ("blunt",)
    assert {p.id for p in reduced.positions} == {"w0", "w1", "w3", "w4"}
    for path in reduced.paths():
        assert "blunt" in {e.label for e in path}
    # the knife edge into w1 is gone but the blunt edge stays
    assert sorted(e.label for e in reduced.incoming("w1")) == ["blunt"]


def test_reduced_ceg_conjunction(toy_ceg):
    from cegforge import create_reduced_ceg

    reduced = create_reduced_ceg(toy_ceg, ["blunt", "male"])
    assert {p.id for p in reduced.positions} == {"w0", "w1", "w4"}
    assert len(reduced.paths()) == 2
    twice = create_reduced_ceg(reduced, ["no"])
    assert twice.reduced_by == ("blunt", "male", "no")
    assert len(twice.paths()) == 1


def test_reduced_ceg_unknown_category(toy_ceg):
    from cegforge import create_reduced_ceg

    with pytest.raises(UnknownNameError):
        create_reduced_ceg(toy_ceg, ["hammer"])


# ---------------------------------------------------------------------------
# Summaries and comparison


def test_summary_totals_and_flags(toy_ceg):
    summary = summarize_ceg(toy_ceg)
    assert summary.total == pytest.approx(
        sum(sm.log_score() for sm in toy_ceg.stage_models)
    )
    by_stage = {r.stage: r for r in summary.rows}
    assert by_stage["u1"].ess == pytest.approx(3.0 + 8.0)
    assert all(r.flagged for r in summary.rows)  # tiny toy data
    assert summary.has_low_information


def test_summary_format_block():
    summary = ModelSummary(
        total=-2402.515,
        rows=(
            SummaryRow("u1", -2388.659, 3929.0),
            SummaryRow("u8", -13.856, 27.0),
        ),
        dataset_fingerprint=None,
    )
    assert summary.format() == (
        "Chain Event Graph Summary\n"
        + "-" * 52
        + "\n"
        "Total Log Marginal Likelihood:  -2402.515\n"
        "Stage  LogScore  ESS\n"
        "u1  -2388.659  3929\n"
        "u8  -13.856  27  **\n"
        "\n"
        "Note: ESS (Effective Sample Size) reflects the total information "
        "(prior + data) available for each stage.\n"
        'Stages with ESS < 100 are flagged with "**" as potentially '
        "low-information stages.\n"
        "Increasing the strength of the prior would help this.\n"
    )


def test_ess_flag_threshold_is_strict():
    at = SummaryRow("u1", -1.0, 100.0)
    below = SummaryRow("u2", -1.0, 99.999)
    assert not at.flagged
    assert below.flagged


def test_summary_payload_round_trip(toy_ceg):
    summary = summarize_ceg(toy_ceg)
    clone = ModelSummary.from_json(summary.to_json())
    assert clone == summary


def _plain_summary(total: float, fingerprint=None, ess: float = 1000.0):
    return ModelSummary(
        total=total,
        rows=(SummaryRow("u1", total, ess),),
        dataset_fingerprint=fingerprint,
    )


def test_compare_prefers_higher_total():
    result = compare_ceg_models(_plain_summary(-4938.692), _plain_summary(-4890.359))
    assert result.log_bayes_factor == pytest.approx(-48.333, abs=5e-4)
    assert result.preferred == "Model 2"
    text = result.format()
    assert "Log marginal of model 1:  -4938.692" in text
    assert "Log marginal of model 2:  -4890.359" in text
    assert "Log Bayes factor of Model 1 vs Model 2:  -48.333" in text
    assert "Preferred Model: Model 2" in text


def test_compare_antisymmetry_and_tie():
    a, b = _plain_summary(-10.0), _plain_summary(-12.5)
    fwd = compare_ceg_models(a, b)
    rev = compare_ceg_models(b, a)
    assert fwd.log_bayes_factor == -rev.log_bayes_factor
    tie = compare_ceg_models(a, _plain_summary(-10.0))
    assert tie.preferred == "tie"
    assert "Preferred Model: tie (equal scores)" in tie.format()


def test_compare_warns_on_different_datasets():
    result = compare_ceg_models(
        _plain_summary(-10.0, fingerprint="aaa"),
        _plain_summary(-12.0, fingerprint="bbb"),
    )
    assert result.warning is not None
    assert "Warning:" in result.format()
    same = compare_ceg_models(
        _plain_summary(-10.0, fingerprint="aaa"),
        _plain_summary(-12.0, fingerprint="aaa"),
    )
    assert same.warning is None


def test_compare_cautions_on_low_information():
    result = compare_ceg_models(
        _plain_summary(-10.0, ess=50.0), _plain_summary(-12.0)
    )
    assert result.caution is not None
    assert "Caution:" in result.format()


def test_summarize_stage_models_direct():
    sms = (
        StageModel("u1", ("s0",), ("a", "b"), (1.0, 1.0), (30, 70)),
        StageModel("u2", ("s1",), ("c", "d"), (2.0, 2.0), (10, 10)),
    )
    summary = summarize_stage_models(sms)
    assert summary.rows[0].ess == 102.0
    assert not summary.rows[0].flagged
    assert summary.rows[1].flagged


# ---------------------------------------------------------------------------
# Update table and serialization


def test_update_table_rows(toy_ceg):
    table = update_table(toy_ceg)
    assert len(table.rows) == 7
    first = table.rows[0]
    assert first["stage"] == "u1"
    assert first["prior"] == [1.0, 1.0, 1.0]
    assert first["data"] == [3, 3, 2]
    assert first["posterior"] == [4.0, 4.0, 3.0]
    text = table.format()
    assert text.splitlines()[0].split() == [
        "Stage", "Prior", "Prior", "Mean", "Data", "Posterior",
        "Posterior", "Mean",
    ]
    csv_text = table.to_csv_text()
    assert len(csv_text.strip().splitlines()) == 8


def test_update_table_accepts_staged_tree(toy_model):
    updated = posterior_update(toy_model)
    assert update_table(updated).rows == update_table(
        contract_to_ceg(updated)
    ).rows


def test_ceg_payload_round_trip(toy_ceg):
    clone = CEGModel.from_json(toy_ceg.to_json())
    assert clone == toy_ceg


def test_ceg_dot_output(toy_ceg):
    dot = toy_ceg.to_dot()
    assert '"w0"' in dot and f'"{SINK_ID}"' in dot
    assert "fillcolor" in dot
