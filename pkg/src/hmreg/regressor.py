"""Four-layer hyperbox mixture regressor with closed-form training.

Prediction stacks four stages: hyperbox memberships, normalisation to
mixture weights, one affine expert per box, and the weighted sum of the
expert outputs. Training clusters the inputs into hyperboxes, assembles
the block design matrix whose row h, block l is
``[w_hl*x_h1, ..., w_hl*x_hn, w_hl]`` (w_hl the normalised membership),
and solves the resulting linear system for all expert coefficients at
once with a rank-revealing pseudo-inverse.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import ScalerParams, SupervisedSet, apply_scaler, fit_scaler
from .hyperbox import (ClusterConfig, Hyperbox, MembershipParams, cluster,
                       membership_matrix, stack_boxes)

#: relative singular-value cutoff of the least-squares solve
SVD_RCOND = 1e-10

MODEL_SCHEMA = "hmr-model/1"


def normalize_memberships(u) -> np.ndarray:
    """Scale memberships so they sum to 1.

    When every membership is 0 (a query far outside all boxes) the
    weights fall back to uniform 1/L, which keeps the prediction defined
    and matches the limit of all memberships vanishing together.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.size == 0:
        raise ValueError("membership vector is empty")
    total = u.sum()
    if total == 0.0:
        return np.full(u.size, 1.0 / u.size)
    return u / total


def local_expert(x, d, r: float) -> float:
    """Affine expert value d.x + r."""
    x = np.asarray(x, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if x.shape != d.shape:
        raise ValueError("coefficient vector must match the input dimension")
    return float(d @ x + r)


@dataclass(frozen=True)
class HmrModel:
    """Trained hyperbox mixture: box list, expert coefficients, scaling.

    `coeffs` has one row per box, laid out as [d_1, ..., d_n, r]. The
    scaler holds the training-fold min/max used to map raw features and
    target into model space; predictions can be produced in either space.
    """

    boxes: list[Hyperbox]
    params: MembershipParams
    coeffs: np.ndarray
    scaler: ScalerParams
    feature_names: list[str]
    target_name: str = "y"
    horizon: int = 1
    config: ClusterConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=np.float64))
        if not self.boxes:
            raise ValueError("model has no hyperboxes (untrained)")
        n = self.boxes[0].n_dims
        if self.coeffs.shape != (len(self.boxes), n + 1):
            raise ValueError(
                f"coeffs must be ({len(self.boxes)}, {n + 1}), got {self.coeffs.shape}"
            )
        if self.params.n_dims != n or len(self.feature_names) != n:
            raise ValueError("boxes, params and feature names disagree on dimension")

    @property
    def n_boxes(self) -> int:
        return len(self.boxes)

    @property
    def n_features(self) -> int:
        return self.boxes[0].n_dims

    def predict_scaled(self, X) -> np.ndarray:
        """Predictions in model (scaled) space for scaled inputs X."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        U = membership_matrix(self.boxes, X, self.params)
        totals = U.sum(axis=1, keepdims=True)
        Z = np.where(totals > 0, U / np.where(totals > 0, totals, 1.0),
                     1.0 / self.n_boxes)
        experts = X @ self.coeffs[:, :-1].T + self.coeffs[:, -1]
        return (Z * experts).sum(axis=1)

    def predict(self, X_raw) -> np.ndarray:
        """Predictions in original units for raw-unit inputs."""
        X = self.scaler.transform_features(np.atleast_2d(X_raw))
        return self.scaler.inverse_target(self.predict_scaled(X))


def predict_one(model: HmrModel, x_scaled) -> float:
    """Single prediction in scaled space (membership -> weights -> mix)."""
    x = np.asarray(x_scaled, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"expected {model.n_features} features, got shape {x.shape}"
        )
    u = membership_matrix(model.boxes, x[None, :], model.params)[0]
    weights = normalize_memberships(u)
    experts = model.coeffs[:, :-1] @ x + model.coeffs[:, -1]
    return float(weights @ experts)


# ---------------------------------------------------------------------------
# least-squares training
# ---------------------------------------------------------------------------

def assemble_design(samples, boxes: list[Hyperbox],
                    params: MembershipParams) -> np.ndarray:
    """Block design matrix, shape (N, L*(n+1)).

    Row h concatenates, for each box l, the normalised membership weight
    times [x_h, 1]; the all-zero membership fallback mirrors prediction.
    """
    X = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    if not boxes:
        raise ValueError("box list is empty")
    n = X.shape[1]
    U = membership_matrix(boxes, X, params)
    totals = U.sum(axis=1, keepdims=True)
    Z = np.where(totals > 0, U / np.where(totals > 0, totals, 1.0), 1.0 / len(boxes))
    ext = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    blocks = Z[:, :, None] * ext[:, None, :]
    return blocks.reshape(X.shape[0], len(boxes) * (n + 1))


def solve_lso(A, Y) -> np.ndarray:
    """Minimum-norm least-squares coefficients for A D ~= Y.

    Singular values below SVD_RCOND times the largest are treated as
    zero, so rank-deficient systems (overlapping or sparsely hit boxes)
    are handled without error.
    """
    A = np.asarray(A, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64).ravel()
    if A.ndim != 2 or A.shape[0] == 0 or A.shape[1] == 0:
        raise ValueError("design matrix must be 2-D and nonempty")
    if A.shape[0] != Y.size:
        raise ValueError("row count of A must match length of Y")
    D, _, _, _ = np.linalg.lstsq(A, Y, rcond=SVD_RCOND)
    return D


def fit(train: SupervisedSet, config: ClusterConfig, params: MembershipParams,
        scaler: ScalerParams | None = None) -> HmrModel:
    """Train on an already-scaled set: cluster, assemble, solve, package.

    `scaler` is stored on the model for later unscaling; omit it when the
    data lives natively in [0, 1].
    """
    if train.n_samples == 0:
        raise ValueError("training set is empty")
    boxes = cluster(train.inputs, config, params)
    A = assemble_design(train.inputs, boxes, params)
    D = solve_lso(A, train.targets)
    coeffs = D.reshape(len(boxes), train.n_features + 1)
    return HmrModel(
        boxes=boxes,
        params=params,
        coeffs=coeffs,
        scaler=scaler if scaler is not None else ScalerParams.identity(train.n_features),
        feature_names=list(train.feature_names),
        target_name=train.target_name,
        horizon=train.horizon,
        config=config,
    )


def fit_raw(train: SupervisedSet, config: ClusterConfig,
            params: MembershipParams, trace=None, **trace_ctx) -> HmrModel:
    """Scale a raw-unit training set with its own statistics, then fit.

    The optional `trace` records which cultures fed the scaler and the
    fit, for leakage audits of surrounding pipelines.
    """
    scaler = fit_scaler(train)
    if trace is not None:
        trace.record("scale", train.culture_tags, **trace_ctx)
    scaled = apply_scaler(train, scaler)
    if trace is not None:
        trace.record("fit", train.culture_tags, **trace_ctx)
    return fit(scaled, config, params, scaler=scaler)


# ---------------------------------------------------------------------------
# recursive two-step prediction
# ---------------------------------------------------------------------------

def predict_recursive(model_h1: HmrModel, model_h2: HmrModel,
                      x_scaled) -> tuple[float, float]:
    """Chained scaled-space prediction: feed step 1's output into step 2.

    `model_h2` must take exactly the features of `model_h1` plus one
    final slot for the step-1 prediction.
    """
    if model_h2.n_features != model_h1.n_features + 1:
        raise ValueError(
            f"second model expects {model_h2.n_features} features, "
            f"first provides {model_h1.n_features} + 1"
        )
    x = np.asarray(x_scaled, dtype=np.float64)
    yhat_t1 = predict_one(model_h1, x)
    yhat_t2 = predict_one(model_h2, np.append(x, yhat_t1))
    return yhat_t1, yhat_t2


def forecast_two_step(model_h1: HmrModel, model_h2: HmrModel,
                      X_raw) -> tuple[np.ndarray, np.ndarray]:
    """Raw-unit two-step forecast for a batch of rows.

    Step 1 predicts one day ahead in original units; its output fills the
    final input slot of the second model, each model applying its own
    stored scaling. Returns (one-day, two-day) predictions in raw units.
    """
    if model_h2.n_features != model_h1.n_features + 1:
        raise ValueError(
            f"second model expects {model_h2.n_features} features, "
            f"first provides {model_h1.n_features} + 1"
        )
    if model_h2.feature_names[:-1] != model_h1.feature_names:
        raise ValueError(
            "second model's leading features must match the first model's"
        )
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=np.float64))
    yhat_t1 = model_h1.predict(X_raw)
    yhat_t2 = model_h2.predict(np.column_stack([X_raw, yhat_t1]))
    return yhat_t1, yhat_t2


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_model(model: HmrModel, path) -> None:
    """Write the model as a self-describing JSON document.

    Field order is fixed (schema, names, target, horizon, sensitivity,
    clustering settings, box corners, coefficients, scaler) so identical
    models serialise to identical bytes; floats use shortest round-trip
    representation, making save/load reproduce predictions bitwise.
    """
    cfg = model.config
    V, W = stack_boxes(model.boxes)
    doc = {
        "schema": MODEL_SCHEMA,
        "feature_names": list(model.feature_names),
        "target_name": model.target_name,
        "horizon": model.horizon,
        "sensitivity": model.params.sensitivity.tolist(),
        "theta": cfg.theta if cfg else None,
        "top_k": cfg.top_k if cfg else None,
        "expansion_fraction": cfg.expansion_fraction if cfg else None,
        "boxes": {"min": V.tolist(), "max": W.tolist()},
        "coefficients": model.coeffs.tolist(),
        "scaler": {
            "feature_min": model.scaler.feature_min.tolist(),
            "feature_max": model.scaler.feature_max.tolist(),
            "target_min": model.scaler.target_min,
            "target_max": model.scaler.target_max,
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> HmrModel:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != MODEL_SCHEMA:
        raise ValueError(
            f"unsupported model schema {doc.get('schema')!r}, expected {MODEL_SCHEMA!r}"
        )
    boxes = [
        Hyperbox(np.asarray(v), np.asarray(w))
        for v, w in zip(doc["boxes"]["min"], doc["boxes"]["max"])
    ]
    config = None
    if doc.get("theta") is not None:
        config = ClusterConfig(
            theta=doc["theta"], top_k=doc["top_k"],
            expansion_fraction=doc["expansion_fraction"],
        )
    sc = doc["scaler"]
    return HmrModel(
        boxes=boxes,
        params=MembershipParams(np.asarray(doc["sensitivity"])),
        coeffs=np.asarray(doc["coefficients"]),
        scaler=ScalerParams(
            np.asarray(sc["feature_min"]), np.asarray(sc["feature_max"]),
            sc["target_min"], sc["target_max"],
        ),
        feature_names=list(doc["feature_names"]),
        target_name=doc["target_name"],
        horizon=doc["horizon"],
        config=config,
    )
