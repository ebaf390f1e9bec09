"""Built-in benchmark tables available without network access.

Two are generated exactly from their defining rules (balance-scale and the
tic-tac-toe endgame corpus); three load from scikit-learn's bundled copies
(iris, wine, and the Wisconsin diagnostic breast cancer table).  Each mirrors
a public OpenML dataset, noted per loader, so runs are comparable whether
the rows came from the generator or the network.
"""

from __future__ import annotations

import numpy as np

from .tabular import FeatureSpec, Schema, Table


def _numeric_schema(names, classes) -> Schema:
    feats = tuple(FeatureSpec(name=n, kind="numerical") for n in names)
    return Schema(features=feats, label_name="class", classes=tuple(classes))


def balance_scale() -> Table:
    """Full 5^4 factorial of the balance-scale rule (OpenML dataset 11).

    Class is L/B/R by comparing left weight*distance against right; the
    exact class counts are 288/49/288.
    """
    names = ("left-weight", "left-distance", "right-weight", "right-distance")
    schema = _numeric_schema(names, ("L", "B", "R"))
    rows = []
    labels = []
    for lw in range(1, 6):
        for ld in range(1, 6):
            for rw in range(1, 6):
                for rd in range(1, 6):
                    rows.append((lw, ld, rw, rd))
                    left, right = lw * ld, rw * rd
                    labels.append(0 if left > right else (1 if left == right else 2))
    values = np.array(rows, dtype=np.float64)
    return Table(schema, values, np.array(labels, dtype=np.int64))


_LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)


def _winner(board: list[int]) -> int:
    for a, b, c in _LINES:
        if board[a] != 0 and board[a] == board[b] == board[c]:
            return board[a]
    return 0


def tic_tac_toe() -> Table:
    """All legal end-of-game boards with x moving first (OpenML dataset 50).

    A game ends at the first three-in-a-row or a full board; distinct final
    boards are collected (958 of them) and classed positive when x holds a
    line, negative otherwise.
    """
    cats = ("b", "o", "x")  # cell code 0/1/2 below
    feats = tuple(
        FeatureSpec(name=f"{r}{c}", kind="categorical", categories=cats)
        for r in ("top", "middle", "bottom")
        for c in ("-left", "-middle", "-right")
    )
    schema = Schema(features=feats, label_name="class", classes=("negative", "positive"))

    finals: set[tuple[int, ...]] = set()

    def play(board: list[int], player: int) -> None:
        for cell in range(9):
            if board[cell] != 0:
                continue
            board[cell] = player
            if _winner(board) != 0 or all(board):
                finals.add(tuple(board))
            else:
                play(board, 3 - player)
            board[cell] = 0

    play([0] * 9, 2)  # x plays first; x is category index 2
    boards = sorted(finals)
    values = np.array(boards, dtype=np.float64)
    labels = np.array(
        [1 if _winner(list(b)) == 2 else 0 for b in boards], dtype=np.int64
    )
    return Table(schema, values, labels)


def _from_sklearn(loader, class_names=None) -> Table:
    bunch = loader()
    names = [str(n).replace(" ", "-") for n in bunch.feature_names]
    classes = class_names or tuple(str(c) for c in bunch.target_names)
    schema = _numeric_schema(names, classes)
    return Table(
        schema,
        np.asarray(bunch.data, dtype=np.float64),
        np.asarray(bunch.target, dtype=np.int64),
    )


def iris() -> Table:
    """Fisher's iris measurements (OpenML dataset 61)."""
    from sklearn.datasets import load_iris

    return _from_sklearn(load_iris)


def wine() -> Table:
    """Wine cultivar chemical analysis (OpenML dataset 187)."""
    from sklearn.datasets import load_wine

    return _from_sklearn(load_wine)


def wdbc() -> Table:
    """Wisconsin diagnostic breast cancer, 30 features (OpenML dataset 1510)."""
    from sklearn.datasets import load_breast_cancer

    return _from_sklearn(load_breast_cancer)


BUILTIN = {
    "balance_scale": balance_scale,
    "tic_tac_toe": tic_tac_toe,
    "iris": iris,
    "wine": wine,
    "wdbc": wdbc,
}


def get_builtin(name: str) -> Table:
    try:
        loader = BUILTIN[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN))
        raise KeyError(f"unknown builtin dataset {name!r}; have: {known}") from None
    return loader()
