"""End-to-end runs: decision-blind, decision-aware, rolling-average, oracle.

All policies share one evaluation protocol. A model is trained on every
period before the held-out evaluation period, its scenario samples feed
the per-product allocation problems, and the resulting allocations are
scored against the realized demand of the evaluation period as unmet
demand in percent. The decision-aware run differs from the decision-blind
run in exactly one thing: the training-row weights.

When `inventory_feature` is set (the synthetic scenario does this, with
prior inventory as feature 0), allocation and scoring are computed on the
net requirement, demand minus on-hand inventory floored at zero. Budgets
follow the same convention.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .allocator import AllocationProblem, solve_greedy
from .errors import ConfigError
from .forest import ForestParams, train_forest
from .ingest import build_feature_table, clean_records, parse_records, split_train_eval
from .linear import train_linear
from .periods import period_index
from .synth import INVENTORY_FEATURE, TwoClassScenario, generate
from .weights import (
    WeightConfig,
    apply_report,
    budgets_from_fraction,
    compute_weights,
    lookup_budget,
    requirement,
)

POLICY_ORDER = ("decision_blind", "decision_aware", "rolling_average", "oracle")


@dataclass
class RunConfig:
    csv_path: str | None = None
    schema: dict | None = None
    scenario: TwoClassScenario | None = None
    periods: int = 24  # synthetic generation length
    lag_months: int = 10
    outlier_multiplier: float = 10.0
    eval_period: str | None = None  # None -> latest period present
    budget_fraction: float | None = None  # None -> scenario fraction, else 0.7
    budgets: dict | None = None  # explicit period/(period, product) -> units
    model: str = "forest"  # or "linear"
    forest_params: ForestParams = field(default_factory=ForestParams)
    linear_samples: int = 100
    weight_config: WeightConfig = field(default_factory=WeightConfig)
    rolling_window: int = 3
    inventory_feature: object = "auto"  # "auto" | None | feature index
    seed: int = 0

    def __post_init__(self):
        if (self.csv_path is None) == (self.scenario is None):
            raise ConfigError("exactly one input source required: csv_path or scenario")
        if self.budget_fraction is not None and not 0 < self.budget_fraction <= 1:
            raise ConfigError("budget_fraction must be in (0, 1]")
        if self.model not in ("forest", "linear"):
            raise ConfigError("model must be 'forest' or 'linear'")
        if self.rolling_window < 1:
            raise ConfigError("rolling_window must be >= 1")
        if self.periods < 2:
            raise ConfigError("need at least two periods (train and eval)")

    def resolved_inventory_feature(self):
        if self.inventory_feature == "auto":
            return INVENTORY_FEATURE if self.scenario is not None else None
        return self.inventory_feature

    def resolved_budget_fraction(self):
        if self.budget_fraction is not None:
            return self.budget_fraction
        if self.scenario is not None:
            return self.scenario.budget_fraction
        return 0.7

    def training_signature(self):
        sig = {"model": self.model, "seed": self.seed}
        if self.model == "forest":
            sig["params"] = self.forest_params.to_dict()
        else:
            sig["n_samples"] = self.linear_samples
        return sig


@dataclass
class PreparedRun:
    table: object
    train: object
    eval_table: object
    eval_period: str
    budgets_train: dict
    budgets_eval: dict
    inventory_feature: int | None
    rejects: list = field(default_factory=list)
    exclusions: list = field(default_factory=list)
    ground_truth: np.ndarray | None = None


def prepare(config):
    """Load or generate data and fix the train/eval split and budgets."""
    rejects, exclusions, truth = [], [], None
    if config.scenario is not None:
        table, truth = generate(config.scenario, periods=config.periods)
    else:
        records, rejects = parse_records(config.csv_path, schema=config.schema)
        kept, exclusions = clean_records(records, outlier_multiplier=config.outlier_multiplier)
        table = build_feature_table(kept, lag_months=config.lag_months)

    eval_period = config.eval_period or max(set(table.periods), key=period_index)
    train, eval_table = split_train_eval(table, eval_period)
    inv = config.resolved_inventory_feature()

    if config.budgets is not None:
        budgets_train = dict(config.budgets)
        budgets_eval = dict(config.budgets)
    else:
        fraction = config.resolved_budget_fraction()
        budgets_train = budgets_from_fraction(train, fraction, inventory_feature=inv)
        budgets_eval = budgets_from_fraction(eval_table, fraction, inventory_feature=inv)

    return PreparedRun(
        table=table,
        train=train,
        eval_table=eval_table,
        eval_period=eval_period,
        budgets_train=budgets_train,
        budgets_eval=budgets_eval,
        inventory_feature=inv,
        rejects=rejects,
        exclusions=exclusions,
        ground_truth=truth,
    )


def unmet_demand_pct(allocation, realized):
    """Unmet demand as percent of total; None when total demand is zero."""
    realized = np.asarray(realized, dtype=float)
    allocation = np.asarray(allocation, dtype=float)
    total = realized.sum()
    if total <= 0:
        return None
    return float(100.0 * np.maximum(realized - allocation, 0.0).sum() / total)


def mdape(predictions, realized):
    """Median absolute percentage error over rows with positive demand."""
    predictions = np.asarray(predictions, dtype=float)
    realized = np.asarray(realized, dtype=float)
    mask = realized > 0
    if not mask.any():
        return None
    ape = 100.0 * np.abs(predictions[mask] - realized[mask]) / realized[mask]
    return float(np.median(ape))


def evaluate(allocations, realized):
    """Per-product unmet-demand percentages for given allocation vectors."""
    report = {}
    for product in sorted(realized):
        report[product] = {
            "unmet_demand_pct": unmet_demand_pct(allocations[product], realized[product])
        }
    return report


def _eval_groups(prepared):
    """Per-product row indices of the evaluation table, in table order."""
    groups = {}
    for i, product in enumerate(prepared.eval_table.product_ids):
        groups.setdefault(product, []).append(i)
    return {p: np.asarray(rows) for p, rows in sorted(groups.items())}


def _requirements(prepared, rows, values):
    if prepared.inventory_feature is None:
        return np.asarray(values, dtype=float)
    inv = prepared.eval_table.X[rows, prepared.inventory_feature]
    if np.ndim(values) == 2:
        return requirement(np.asarray(values, float), inv[:, None])
    return requirement(np.asarray(values, float), inv)


@dataclass
class PolicyOutcome:
    policy: str
    per_product: dict
    training: dict

    def mean_unmet_pct(self):
        vals = [
            e["unmet_demand_pct"]
            for e in self.per_product.values()
            if e["unmet_demand_pct"] is not None
        ]
        return float(np.mean(vals)) if vals else None


def _allocate_policy(name, prepared, point_by_product, samples_by_product, training):
    per_product = {}
    for product, rows in _eval_groups(prepared).items():
        realized_req = _requirements(prepared, rows, prepared.eval_table.y[rows])
        budget = float(lookup_budget(prepared.budgets_eval, prepared.eval_period, product))
        problem = AllocationProblem.from_row_samples(samples_by_product[product], budget)
        result = solve_greedy(problem)
        point = point_by_product.get(product)
        per_product[product] = {
            "allocation": result.allocation,
            "objective": result.objective,
            "budget": budget,
            "realized_requirement": realized_req,
            "unmet_demand_pct": unmet_demand_pct(result.allocation, realized_req),
            "mdape": None
            if point is None
            else mdape(point, prepared.eval_table.y[rows]),
            "facility_ids": [prepared.eval_table.facility_ids[i] for i in rows],
        }
    return PolicyOutcome(policy=name, per_product=per_product, training=training)


def _model_policy(name, config, prepared, model, weights_label):
    points, samples = {}, {}
    for product, rows in _eval_groups(prepared).items():
        X = prepared.eval_table.X[rows]
        points[product] = np.atleast_1d(model.predict_point(X))
        raw = model.predict_samples(X)
        samples[product] = _requirements(prepared, rows, raw)
    training = dict(config.training_signature(), weights=weights_label)
    return _allocate_policy(name, prepared, points, samples, training)


def _train_model(config, table):
    if config.model == "forest":
        return train_forest(table, params=config.forest_params, seed=config.seed)
    return train_linear(table, n_samples=config.linear_samples)


def _weight_config(config, prepared):
    return replace(config.weight_config, inventory_feature=prepared.inventory_feature)


def run_decision_blind(config, prepared=None, model=None):
    """Uniform-weight training, then optimize on the model's samples."""
    prepared = prepared or prepare(config)
    model = model or _train_model(config, prepared.train)
    return _model_policy("decision_blind", config, prepared, model, "uniform")


def run_decision_aware(config, prepared=None, initial_model=None):
    """Blind training, decision weights, weighted retrain, same protocol.

    Returns (outcome, weight_report)."""
    prepared = prepared or prepare(config)
    initial_model = initial_model or _train_model(config, prepared.train)
    wcfg = _weight_config(config, prepared)
    report = compute_weights(prepared.train, initial_model, prepared.budgets_train, wcfg)
    reweighted = apply_report(prepared.train, report)
    model = _train_model(config, reweighted)
    label = f"decision_aware({wcfg.jacobian_mode})"
    outcome = _model_policy("decision_aware", config, prepared, model, label)
    return outcome, report


def rolling_forecasts(prepared, window):
    """Trailing-mean demand per evaluation row over the last `window` months.

    Only months actually present count toward the mean; rows with no
    history forecast zero.
    """
    history = {}
    for i in range(len(prepared.train)):
        key = (prepared.train.facility_ids[i], prepared.train.product_ids[i])
        history.setdefault(key, {})[period_index(prepared.train.periods[i])] = float(
            prepared.train.y[i]
        )
    eval_idx = period_index(prepared.eval_period)
    forecasts = np.zeros(len(prepared.eval_table))
    for i in range(len(prepared.eval_table)):
        key = (prepared.eval_table.facility_ids[i], prepared.eval_table.product_ids[i])
        series = history.get(key, {})
        values = [
            series[m] for m in range(eval_idx - window, eval_idx) if m in series
        ]
        forecasts[i] = float(np.mean(values)) if values else 0.0
    return forecasts


def run_rolling_average(config, prepared=None, window=None):
    """Trailing-mean point forecast allocated greedily (single scenario)."""
    prepared = prepared or prepare(config)
    window = window or config.rolling_window
    forecasts = rolling_forecasts(prepared, window)
    points, samples = {}, {}
    for product, rows in _eval_groups(prepared).items():
        points[product] = forecasts[rows]
        samples[product] = _requirements(prepared, rows, forecasts[rows][:, None])
    training = {"window": window, "weights": "none"}
    return _allocate_policy("rolling_average", prepared, points, samples, training)


def run_oracle(config, prepared=None):
    """Perfect foresight: allocate against the realized requirement itself."""
    prepared = prepared or prepare(config)
    samples = {}
    for product, rows in _eval_groups(prepared).items():
        realized_req = _requirements(prepared, rows, prepared.eval_table.y[rows])
        samples[product] = realized_req[:, None]
    training = {"weights": "perfect_foresight"}
    return _allocate_policy("oracle", prepared, {}, samples, training)


def compare(config):
    """Run all four policies on one prepared dataset and assemble a report."""
    prepared = prepare(config)
    blind_model = _train_model(config, prepared.train)
    blind = run_decision_blind(config, prepared, model=blind_model)
    aware, weight_report = run_decision_aware(config, prepared, initial_model=blind_model)
    rolling = run_rolling_average(config, prepared)
    oracle = run_oracle(config, prepared)
    outcomes = {o.policy: o for o in (blind, aware, rolling, oracle)}

    products = {}
    for product, rows in _eval_groups(prepared).items():
        realized_req = _requirements(prepared, rows, prepared.eval_table.y[rows])
        entry = {
            "total_requirement": float(realized_req.sum()),
            "budget": float(
                lookup_budget(prepared.budgets_eval, prepared.eval_period, product)
            ),
            "policies": {},
        }
        for name in POLICY_ORDER:
            p = outcomes[name].per_product[product]
            entry["policies"][name] = {
                "unmet_demand_pct": p["unmet_demand_pct"],
                "objective": p["objective"],
                "mdape": p["mdape"],
            }
        products[product] = entry

    report = {
        "eval_period": prepared.eval_period,
        "policy_order": list(POLICY_ORDER),
        "products": products,
        "training_configs": {name: outcomes[name].training for name in POLICY_ORDER},
        "config": {
            "model": config.model,
            "seed": config.seed,
            "budget_fraction": config.resolved_budget_fraction()
            if config.budgets is None
            else None,
            "inventory_feature": prepared.inventory_feature,
            "weight_config": _weight_config(config, prepared).to_dict(),
            "source": "scenario" if config.scenario is not None else config.csv_path,
        },
    }
    return report, outcomes, weight_report, prepared


def report_to_json(report):
    return json.dumps(report, indent=2, sort_keys=True)


def write_breakdown_csv(path, outcomes, prepared):
    """Per-facility shortfall breakdown across all policies."""
    import csv as _csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh)
        header = ["product", "facility_id", "realized_requirement"]
        for name in POLICY_ORDER:
            header += [f"{name}_allocation", f"{name}_shortfall"]
        writer.writerow(header)
        for product, rows in _eval_groups(prepared).items():
            base = outcomes[POLICY_ORDER[0]].per_product[product]
            for j, fac in enumerate(base["facility_ids"]):
                row = [product, fac, repr(float(base["realized_requirement"][j]))]
                for name in POLICY_ORDER:
                    p = outcomes[name].per_product[product]
                    alloc = float(p["allocation"][j])
                    short = max(float(p["realized_requirement"][j]) - alloc, 0.0)
                    row += [repr(alloc), repr(short)]
                writer.writerow(row)
