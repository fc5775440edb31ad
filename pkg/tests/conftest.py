import numpy as np
import pytest

from delisi.model import ModelParams, State
from delisi.equilibria import classify
from delisi import continuation as cont
from delisi import loci

ALPHA1, ALPHA2, XC = 0.297312, 0.00318, 2500.0


@pytest.fixture(scope="session")
def anchor_gauge():
    return ALPHA1, ALPHA2, XC


@pytest.fixture(scope="session")
def bt_params():
    """Parameters at the codimension-two anchor point."""
    return ModelParams(0.01, 0.006672, ALPHA1, ALPHA2, XC)


def hopf_locus_point(params: ModelParams, window=(0.004, 0.06)):
    """Hopf point at the given lambda2, located on the lambda1 branch."""
    br = cont.continue_equilibria(params, "lambda1", window)
    hp = br.tagged("H")[0]
    pp = params.replace(lambda1=hp.values["lambda1"])
    eq = classify(pp, State(hp.values["x"], hp.values["y"]))
    return loci.LocusPoint(loci.LocusKind.HOPF, pp, eq,
                           {"trace": eq.trace, "det": eq.det})
