import numpy as np
import pytest

from artifact.errors import ConfigInvalid
from artifact.jumps import (InterfaceSample, background_sample, classification_csv,
                            classify, contact_sample, enforce_mass_flux, flux_form, perturb,
                            rh_residual, tangential_sample)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def test_background_is_contact():
    s = background_sample()
    assert classify(s).label == "contact"
    assert np.abs(rh_residual(s)).max() == 0.0


def test_tension_label_and_pressure_jump(rng):
    s = contact_sample(rng, 0.5, 1.2)
    assert s.U_plus.p - s.U_minus.p == pytest.approx(0.6)
    assert classify(s).label == "contact_ST"
    assert np.abs(rh_residual(s)).max() < 1e-12


def test_tension_residual_needs_tension_term(rng):
    s = contact_sample(rng, 0.5, 1.2)
    assert np.abs(rh_residual(s.with_tension(0.0))).max() > 0.1


def test_perturbed_sample_unclassified(rng):
    s = perturb(contact_sample(rng), rng, 1e-2)
    assert classify(s).label == "none"


def test_flux_form_vanishes_on_exact_data(rng):
    for make in (contact_sample, tangential_sample):
        fr = flux_form(make(rng, 0.3, 0.7))
        assert fr.j_continuous
        assert np.abs(fr.vector()).max() < 1e-12


def test_flux_and_conservation_forms_comparable(rng):
    ratios = []
    for i in range(100):
        base = (contact_sample if i % 2 else tangential_sample)(rng, 0.3, 0.5)
        s = enforce_mass_flux(perturb(base, rng, 1e-4))
        ratios.append(np.linalg.norm(flux_form(s).vector()) / np.linalg.norm(rh_residual(s)))
    assert 0.5 <= min(ratios) and max(ratios) <= 2.0


def test_classes_exclusive_in_strict_mode(rng):
    # contact needs H.n above the threshold, tangential needs it below
    for make in (contact_sample, tangential_sample):
        c = classify(make(rng, 0.2, 1.0), strict=True)
        assert len(c.candidates) == 1 and not c.ambiguous


def test_invalid_samples():
    s = background_sample()
    with pytest.raises(ConfigInvalid):
        InterfaceSample(s.U_plus, s.U_minus, [2.0, 0, 0], 0.0)
    with pytest.raises(ConfigInvalid):
        InterfaceSample(s.U_plus, s.U_minus, [1.0, 0, 0], 0.0, sfrak=-1.0)


def test_record_roundtrip_and_csv():
    rec = {"plus": {"p": 1.0, "v": [0, 0, 0], "H": [1, 0, 0], "S": 0.0},
           "minus": {"p": 1.0, "v": [0, 0, 0], "H": [1, 0, 0], "S": 0.5},
           "n": [1, 0, 0], "Vcal": 0.0}
    s = InterfaceSample.from_record(rec)
    assert classify(s).label == "contact"
    text = classification_csv([s])
    assert text.splitlines()[1].startswith("0,contact,0,")
