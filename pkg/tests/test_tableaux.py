import numpy as np
import pytest

from opsplit.core import UsageError
from opsplit.tableaux import (
    ButcherTableau,
    EmbeddedTableau,
    TableauClass,
    builtin,
    builtin_names,
    classify,
    order_residuals,
)


@pytest.mark.parametrize("name", builtin_names())
def test_builtin_order_conditions(name):
    tab = builtin(name)
    res = order_residuals(tab)
    assert max(res.values()) < 1e-13, res
    np.testing.assert_allclose(tab.c, tab.A.sum(axis=1), atol=1e-15)


def test_embedded_weights_have_their_own_order():
    dp = builtin("DP54")
    assert isinstance(dp, EmbeddedTableau)
    hat = ButcherTableau(dp.A, dp.b_hat, order=dp.order_hat)
    assert max(order_residuals(hat).values()) < 1e-13


@pytest.mark.parametrize("name,kind", [
    ("RK4", TableauClass.EXPLICIT),
    ("BE", TableauClass.DIAGONALLY_IMPLICIT),
    ("SDIRK2", TableauClass.DIAGONALLY_IMPLICIT),
    ("GL2", TableauClass.FULLY_IMPLICIT),
])
def test_classification(name, kind):
    assert classify(builtin(name)) is kind


def test_inconsistent_c_rejected():
    with pytest.raises(UsageError):
        ButcherTableau([[0, 0], [1, 0]], [0.5, 0.5], c=[0, 0.5])


def test_shape_errors():
    with pytest.raises(UsageError):
        ButcherTableau([[0, 0]], [1.0])
    with pytest.raises(UsageError):
        ButcherTableau([[0.0]], [0.5, 0.5])


def test_arrays_are_read_only():
    tab = builtin("RK4")
    with pytest.raises(ValueError):
        tab.A[0, 0] = 1.0


def test_aliases_and_unknown_name():
    assert builtin("rk3").name == builtin("Kutta3").name
    with pytest.raises(UsageError, match="available"):
        builtin("nope")
