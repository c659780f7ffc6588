"""Tests for strict config validation, overrides and builders."""

import json
import warnings

import numpy as np
import pytest

from schsim.config import (
    SCHEMA_VERSION,
    ConfigError,
    RunConfig,
    StabilityWarning,
    apply_overrides,
    load_config,
    validate_config,
)
from schsim.spectral import SpectralGrid


def base_config(**patches):
    data = {
        "schema_version": SCHEMA_VERSION,
        "model": {
            "epsilon": 0.01,
            "sigma": {"preset": "sin", "mean": 0.5, "amp": 0.2},
            "n": 16,
        },
        "stepper": {"scheme": "euler_maruyama", "dt": 1e-3, "t_end": 0.1},
        "initial": {"preset": "single_mode", "j": 1, "amp": 0.4},
        "ensemble": {"n_paths": 4, "master_seed": 9},
        "outputs": {"directory": "out", "record_every": 5},
    }
    data.update(patches)
    return data


class TestValidation:
    def test_valid_config_round_trips(self):
        cfg = validate_config(base_config())
        assert isinstance(cfg, RunConfig)
        assert cfg.n_paths == 4
        assert cfg.master_seed == 9
        assert cfg.out_dir == "out"

    def test_top_level_must_be_object(self):
        with pytest.raises(ConfigError, match="top level"):
            validate_config([1, 2])

    def test_schema_version_required_and_checked(self):
        data = base_config()
        del data["schema_version"]
        with pytest.raises(ConfigError, match="schema_version"):
            validate_config(data)
        with pytest.raises(ConfigError, match="schema_version"):
            validate_config(base_config(schema_version=99))

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="extras"):
            validate_config(base_config(extras={}))

    def test_unknown_key_reports_dotted_path(self):
        data = base_config()
        data["model"]["bogus"] = 1
        with pytest.raises(ConfigError, match=r"model\.bogus"):
            validate_config(data)
        data = base_config()
        data["stepper"]["cfl"] = 0.5
        with pytest.raises(ConfigError, match=r"stepper\.cfl"):
            validate_config(data)

    def test_missing_required_key_reports_path(self):
        data = base_config()
        del data["model"]["epsilon"]
        with pytest.raises(ConfigError, match=r"model\.epsilon"):
            validate_config(data)

    def test_bool_not_accepted_as_number(self):
        data = base_config()
        data["model"]["epsilon"] = True
        with pytest.raises(ConfigError, match=r"model\.epsilon"):
            validate_config(data)

    def test_nonfinite_number_rejected(self):
        data = base_config()
        data["stepper"]["dt"] = float("nan")
        with pytest.raises(ConfigError, match="finite"):
            validate_config(data)

    @pytest.mark.parametrize(
        "section,key,value,hint",
        [
            ("model", "epsilon", -0.1, "nonnegative"),
            ("model", "n", 0, ">= 1"),
            ("stepper", "scheme", "leapfrog", "unknown scheme"),
            ("stepper", "dt", 0.0, "positive"),
            ("ensemble", "n_paths", 0, ">= 1"),
            ("outputs", "record_every", 0, ">= 1"),
        ],
    )
    def test_value_range_checks(self, section, key, value, hint):
        data = base_config()
        data[section][key] = value
        with pytest.raises(ConfigError, match=hint):
            validate_config(data)

    def test_noise_form_checked(self):
        data = base_config()
        data["model"]["noise_form"] = "stratonovich"
        with pytest.raises(ConfigError, match="noise_form"):
            validate_config(data)
        data["model"]["noise_form"] = "euler_poincare"
        cfg = validate_config(data)
        assert cfg.model_params().noise_form == "euler_poincare"


class TestSigmaSpecs:
    def test_constant_preset(self):
        data = base_config()
        data["model"]["sigma"] = {"preset": "constant", "value": 0.7}
        sig = validate_config(data).sigma_profile()
        vals = sig.sigma.values()
        assert np.allclose(vals, 0.7, atol=1e-14)
        assert sig.band_limit == 0

    def test_sin_preset_matches_orthonormal_slots(self):
        sig = validate_config(base_config()).sigma_profile()
        x = sig.sigma.grid.x
        expected = 0.5 + 0.2 * np.sqrt(2.0) * np.sin(2 * np.pi * x)
        assert np.allclose(sig.sigma.values(), expected, atol=1e-14)

    def test_raw_coeffs(self):
        data = base_config()
        data["model"]["sigma"] = {"coeffs": [0.6, 0.1, 0.0, 0.0, 0.05]}
        sig = validate_config(data).sigma_profile()
        assert sig.sigma.coeffs[0] == 0.6
        assert sig.sigma.coeffs[1] == 0.1
        assert sig.sigma.coeffs[4] == 0.05
        assert sig.band_limit == 2

    def test_sigma_spec_errors(self):
        for bad in (
            {"preset": "tanh"},
            {"value": 0.5},
            {"preset": "constant"},
            {"coeffs": []},
            {"coeffs": "abc"},
            {"preset": "sin", "mean": 0.5},
        ):
            data = base_config()
            data["model"]["sigma"] = bad
            with pytest.raises(ConfigError, match=r"model\.sigma"):
                validate_config(data)


class TestInitialPresets:
    def grid(self):
        return SpectralGrid(16)

    def test_zero(self):
        data = base_config()
        data["initial"] = {"preset": "zero"}
        u0 = validate_config(data).initial_field(self.grid())
        assert not u0.coeffs.any()

    def test_single_mode_amplitude_is_plain_cosine(self):
        data = base_config()
        data["initial"] = {"preset": "single_mode", "j": 3, "amp": 0.25}
        u0 = validate_config(data).initial_field(self.grid())
        x = u0.grid.x
        assert np.allclose(u0.values(), 0.25 * np.cos(2 * np.pi * 3 * x), atol=1e-13)

    def test_modes_preset_matches_from_modes(self):
        data = base_config()
        data["initial"] = {
            "preset": "modes",
            "c0": 0.3,
            "cos": {"1": 0.6, "2": 0.25},
            "sin": {"1": 0.4, "3": 0.15},
        }
        u0 = validate_config(data).initial_field(self.grid())
        from schsim.spectral import FourierField

        expected = FourierField.from_modes(
            self.grid(), c0=0.3, cos={1: 0.6, 2: 0.25}, sin={1: 0.4, 3: 0.15}
        )
        assert np.array_equal(u0.coeffs, expected.coeffs)

    def test_modes_preset_validation(self):
        for bad in (
            {"preset": "modes"},
            {"preset": "modes", "cos": {}},
            {"preset": "modes", "cos": {"zero": 1.0}},
            {"preset": "modes", "sin": {"0": 1.0}},
            {"preset": "modes", "cos": {"1": "big"}},
        ):
            data = base_config()
            data["initial"] = bad
            with pytest.raises(ConfigError, match="initial"):
                validate_config(data)

    def test_gaussian_bump_centred_and_scaled(self):
        data = base_config()
        data["initial"] = {"preset": "gaussian_bump", "width": 0.08, "amp": 1.5}
        u0 = validate_config(data).initial_field(SpectralGrid(64))
        vals = u0.values()
        x = u0.grid.x
        expected = 1.5 * np.exp(-0.5 * ((x - 0.5) / 0.08) ** 2)
        assert np.allclose(vals, expected, atol=1e-8)

    def test_random_uses_own_seed_not_master_seed(self):
        data = base_config()
        data["initial"] = {"preset": "random", "decay_exponent": 4.0, "seed": 3}
        cfg_a = validate_config(data)
        data_b = base_config()
        data_b["initial"] = {"preset": "random", "decay_exponent": 4.0, "seed": 3}
        data_b["ensemble"]["master_seed"] = 12345
        cfg_b = validate_config(data_b)
        g = self.grid()
        assert np.array_equal(cfg_a.initial_field(g).coeffs,
                              cfg_b.initial_field(g).coeffs)
        data_c = base_config()
        data_c["initial"] = {"preset": "random", "decay_exponent": 4.0, "seed": 4}
        assert not np.array_equal(
            cfg_a.initial_field(g).coeffs,
            validate_config(data_c).initial_field(g).coeffs,
        )

    def test_preset_shape_enforced(self):
        for bad in (
            {"preset": "single_mode", "j": 1},
            {"preset": "single_mode", "j": 0, "amp": 0.1},
            {"preset": "zero", "amp": 0.1},
            {"preset": "gaussian_bump", "width": 0.001, "amp": 1.0},
            {"preset": "random", "decay_exponent": 0.4, "seed": 0},
            {"preset": "breather"},
        ):
            data = base_config()
            data["initial"] = bad
            with pytest.raises(ConfigError, match="initial"):
                validate_config(data)


class TestBuilders:
    def test_model_params(self):
        params = validate_config(base_config()).model_params()
        assert params.epsilon == 0.01
        assert params.n == 16
        assert params.noise_form == "basic"
        assert params.sigma.band_limit == 1

    def test_stepper_config_record_every_from_outputs(self):
        cfg = validate_config(base_config())
        sc = cfg.stepper_config()
        assert sc.scheme == "euler_maruyama"
        assert sc.dt == 1e-3
        assert sc.t_end == 0.1
        assert sc.record_every == 5
        assert sc.exponential_linear is False

    def test_stepper_defaults_without_outputs(self):
        data = base_config()
        del data["outputs"]
        sc = validate_config(data).stepper_config()
        assert sc.record_every == 1

    def test_exponential_linear_flag(self):
        data = base_config()
        data["stepper"]["exponential_linear"] = True
        sc = validate_config(data).stepper_config()
        assert sc.exponential_linear is True

    def test_require_reports_missing_sections(self):
        data = base_config()
        del data["ensemble"]
        cfg = validate_config(data)
        cfg.require("model", "stepper")
        with pytest.raises(ConfigError, match="ensemble"):
            cfg.require("model", "ensemble")


class TestOverrides:
    def test_json_values_are_parsed(self):
        data = apply_overrides(base_config(), ["model.epsilon=0.5"])
        assert data["model"]["epsilon"] == 0.5
        assert isinstance(data["model"]["epsilon"], float)

    def test_strings_fall_back_verbatim(self):
        data = apply_overrides(base_config(), ["stepper.scheme=rk4_deterministic"])
        assert data["stepper"]["scheme"] == "rk4_deterministic"

    def test_booleans_and_lists(self):
        data = apply_overrides(
            base_config(),
            ["stepper.exponential_linear=true", "converge.levels=[16, 32, 64]"],
        )
        assert data["stepper"]["exponential_linear"] is True
        assert data["converge"]["levels"] == [16, 32, 64]

    def test_nested_path_created(self):
        data = apply_overrides({"schema_version": 1}, ["outputs.directory=run1"])
        assert data["outputs"]["directory"] == "run1"

    def test_original_left_untouched(self):
        original = base_config()
        apply_overrides(original, ["model.n=99"])
        assert original["model"]["n"] == 16

    def test_malformed_overrides(self):
        with pytest.raises(ConfigError, match="expected key.path=value"):
            apply_overrides(base_config(), ["model.epsilon"])
        with pytest.raises(ConfigError, match="empty key"):
            apply_overrides(base_config(), [".epsilon=1"])

    def test_override_then_validation_catches_type(self):
        data = apply_overrides(base_config(), ["model.n=banana"])
        with pytest.raises(ConfigError, match=r"model\.n"):
            validate_config(data)


class TestLoadConfig:
    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(base_config()))
        cfg = load_config(str(path))
        assert cfg.model_params().n == 16

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps(base_config()))
        cfg = load_config(str(path), overrides=["model.n=32"])
        assert cfg.model_params().n == 32

    def test_invalid_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"schema_version": 1,\n  "model": }')
        with pytest.raises(ConfigError, match="line 2"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.json"))


class TestStabilityWarning:
    def test_warns_past_explicit_limit(self):
        data = base_config()
        data["model"]["n"] = 64
        data["stepper"]["dt"] = 1e-2
        with pytest.warns(StabilityWarning, match="viscous"):
            validate_config(data)

    def test_exact_linear_flow_exempt(self):
        data = base_config()
        data["model"]["n"] = 64
        data["stepper"]["dt"] = 1e-2
        data["stepper"]["exponential_linear"] = True
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            validate_config(data)

    def test_small_step_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            validate_config(base_config())

    def test_inviscid_silent(self):
        data = base_config()
        data["model"]["epsilon"] = 0.0
        data["stepper"]["dt"] = 10.0
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            validate_config(data)


class TestAuxSections:
    def test_converge_levels_validated(self):
        data = base_config(converge={"levels": [16, 32]})
        with pytest.raises(ConfigError, match="3 levels"):
            validate_config(data)
        cfg = validate_config(base_config(converge={"levels": [16, 32, 64]}))
        assert cfg.section("converge")["levels"] == [16.0, 32.0, 64.0]

    def test_uniqueness_amplitudes_positive(self):
        data = base_config(uniqueness={"amplitudes": [1e-3, 0.0]})
        with pytest.raises(ConfigError, match="positive"):
            validate_config(data)

    def test_gronwall_presets(self):
        cfg = validate_config(base_config(gronwall={"preset": "simulated",
                                                    "n_samples": 100}))
        assert cfg.section("gronwall")["preset"] == "simulated"
        with pytest.raises(ConfigError, match="unknown preset"):
            validate_config(base_config(gronwall={"preset": "magic"}))

    def test_commutators_keys(self):
        cfg = validate_config(base_config(
            commutators={"test_class": "smooth", "deltas": [0.2, 0.1], "seed": 7}))
        assert cfg.section("commutators")["deltas"] == [0.2, 0.1]
        with pytest.raises(ConfigError, match=r"commutators\.j_max"):
            validate_config(base_config(commutators={"j_max": 2}))
