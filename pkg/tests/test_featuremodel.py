import numpy as np
import pytest

from bikeml.errors import InvalidModel, InvalidWeights, MissingReport
from bikeml.featuremodel import (
    ALL_BIKES_NOW,
    Feature,
    FeatureModel,
    attach_measurements,
    enumerate_products,
    parse_feature_model,
    rank_products,
    serialize_feature_model,
    status_feature_model,
)


def fake_report(accuracy, mae_seconds, report_id="r1", station_fingerprint=None):
    doc = {
        "final_test_metrics": {
            "overall_accuracy": accuracy,
            "mae_seconds": mae_seconds,
        },
        "report_id": report_id,
    }
    if station_fingerprint:
        doc["station_fingerprint"] = station_fingerprint
    return doc


def attributed_model(up_acc=0.9, up_mae=120.0, lp_acc=0.8, lp_mae=90.0, costs=(1.0, 5.0, 3.0)):
    model = status_feature_model(*costs)
    return attach_measurements(
        model,
        {
            "LocationPreview": fake_report(lp_acc, lp_mae, "rep-lp"),
            "UserProfile": fake_report(up_acc, up_mae, "rep-up"),
        },
    )


class TestEnumerateProducts:
    def test_stock_model_has_four_products(self):
        products = enumerate_products(status_feature_model())
        assert len(products) == 4
        assert [p.selected_features for p in products] == [
            ("AllBikesNow",),
            ("AllBikesNow", "LocationPreview"),
            ("AllBikesNow", "UserProfile"),
            ("AllBikesNow", "LocationPreview", "UserProfile"),
        ]

    def test_every_product_contains_the_mandatory_feature(self):
        for p in enumerate_products(status_feature_model()):
            assert ALL_BIKES_NOW in p.selected_features

    def test_no_optional_features_single_product(self):
        model = FeatureModel(
            "Status", (Feature("AllBikesNow", mandatory=True, cost=2.0),)
        )
        products = enumerate_products(model)
        assert len(products) == 1
        assert products[0].total_cost == 2.0

    def test_product_count_is_two_to_the_optionals(self):
        extra = tuple(
            Feature(f"Opt{i}", mandatory=False, cost=float(i)) for i in range(3)
        )
        model = FeatureModel(
            "Status",
            (Feature("Base", mandatory=True, cost=0.0),) + extra,
        )
        assert len(enumerate_products(model)) == 2 ** 3

    def test_duplicate_names_rejected(self):
        with pytest.raises(InvalidModel):
            FeatureModel(
                "Status",
                (
                    Feature("A", mandatory=True, cost=0.0),
                    Feature("A", mandatory=False, cost=0.0),
                ),
            )


class TestAttachMeasurements:
    def test_copies_final_metrics(self):
        model = attributed_model(up_acc=0.91)
        up = model.feature("UserProfile")
        assert up.accuracy == 0.91
        assert up.report_id == "rep-up"

    def test_missing_report_raises(self):
        model = status_feature_model()
        with pytest.raises(MissingReport):
            attach_measurements(model, {"UserProfile": fake_report(0.9, 100.0)})

    def test_provenance_id_equals_report_id(self):
        model = attributed_model()
        assert model.feature("LocationPreview").report_id == "rep-lp"
        assert model.feature("UserProfile").report_id == "rep-up"

    def test_report_without_final_metrics_rejected(self):
        model = status_feature_model()
        with pytest.raises(MissingReport):
            attach_measurements(
                model,
                {
                    "LocationPreview": {"report_id": "x"},
                    "UserProfile": fake_report(0.9, 100.0),
                },
            )

    def test_differing_station_fingerprints_warn(self):
        model = attach_measurements(
            status_feature_model(),
            {
                "LocationPreview": fake_report(0.8, 90.0, "a", "fingerprint-one"),
                "UserProfile": fake_report(0.9, 100.0, "b", "fingerprint-two"),
            },
        )
        assert any("station maps" in w for w in model.warnings)


class TestRankProducts:
    def test_full_product_averages_the_singles_when_cost_ignored(self):
        # with w_cost = 0 the combined product scores the mean of the two
        # single-feature scores: it sits between them and above the bare one
        products = enumerate_products(attributed_model())
        ranked = rank_products(products, (1.0, 0.1, 0.0))
        sizes = [len(p.selected_features) for p in ranked]
        assert sizes[0] == 2  # the stronger single-feature product
        assert sizes[1] == 3  # then the full product
        assert ranked[-1].selected_features == ("AllBikesNow",)
        by_sel = {p.selected_features: p.tradeoff_score for p in ranked}
        singles = [
            by_sel[("AllBikesNow", "LocationPreview")],
            by_sel[("AllBikesNow", "UserProfile")],
        ]
        full = by_sel[("AllBikesNow", "LocationPreview", "UserProfile")]
        assert abs(full - np.mean(singles)) < 1e-12

    def test_cost_only_weights_prefer_bare_product(self):
        products = enumerate_products(attributed_model())
        ranked = rank_products(products, (0.0, 0.0, 1.0))
        assert ranked[0].selected_features == ("AllBikesNow",)

    def test_rank_invariant_under_weight_rescaling(self):
        products = enumerate_products(attributed_model())
        rng = np.random.default_rng(8)
        base = (0.7, 0.2, 0.4)
        reference = [p.selected_features for p in rank_products(products, base)]
        for _ in range(25):
            c = float(rng.uniform(0.01, 50.0))
            scaled = tuple(c * w for w in base)
            assert [
                p.selected_features for p in rank_products(products, scaled)
            ] == reference

    def test_free_perfect_feature_never_hurts(self):
        model = FeatureModel(
            "Status",
            (
                Feature("Base", mandatory=True, cost=1.0),
                Feature("Paid", mandatory=False, cost=4.0, predictive=True,
                        accuracy=0.7, mae_seconds=300.0),
                Feature("Free", mandatory=False, cost=0.0, predictive=True,
                        accuracy=1.0, mae_seconds=0.0),
            ),
        )
        ranked = rank_products(enumerate_products(model), (1.0, 1.0, 1.0))
        order = [p.selected_features for p in ranked]
        for with_free, without in [
            (("Base", "Free"), ("Base",)),
            (("Base", "Free", "Paid"), ("Base", "Paid")),
        ]:
            assert order.index(with_free) < order.index(without)

    def test_scores_are_total_order(self):
        ranked = rank_products(enumerate_products(attributed_model()), (1, 1, 1))
        scores = [p.tradeoff_score for p in ranked]
        assert scores == sorted(scores, reverse=True)
        assert all(s is not None for s in scores)

    def test_invalid_weights(self):
        products = enumerate_products(attributed_model())
        with pytest.raises(InvalidWeights):
            rank_products(products, (0.0, 0.0, 0.0))
        with pytest.raises(InvalidWeights):
            rank_products(products, (-1.0, 0.0, 1.0))

    def test_unmeasured_feature_cannot_rank(self):
        products = enumerate_products(status_feature_model())
        with pytest.raises(MissingReport):
            rank_products(products, (1.0, 0.0, 0.0))


class TestFileFormat:
    def test_round_trip(self):
        model = status_feature_model(1.0, 2.5, 4.0)
        text = serialize_feature_model(model)
        assert parse_feature_model(text) == model

    def test_extra_optional_leaves(self):
        text = serialize_feature_model(
            FeatureModel(
                "Status",
                (
                    Feature("AllBikesNow", mandatory=True, cost=0.0),
                    Feature("Extra", mandatory=False, cost=9.0),
                ),
            )
        )
        model = parse_feature_model(text)
        assert len(enumerate_products(model)) == 2

    def test_rejects_other_documents(self):
        with pytest.raises(InvalidModel):
            parse_feature_model('{"format": "something-else"}')
