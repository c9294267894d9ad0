import copy

import pytest

from landau_base.errors import ConfigError
from landau_base.simulation_config import RunConfigFactory

MINIMAL = {
    "grid": {"n_v": 12, "V_max": 4.0},
    "physics": {"gamma": -1.0, "T_target": 0.1},
    "step": {"dt": 0.05},
}


def _with(**sections):
    params = copy.deepcopy(MINIMAL)
    for name, values in sections.items():
        if isinstance(values, dict):
            params.setdefault(name, {}).update(values)
        else:
            params[name] = values
    return params


def _key_path(params) -> str:
    with pytest.raises(ConfigError) as info:
        RunConfigFactory.create_config(params)
    assert info.value.label().startswith("[cli]")
    return info.value.key_path


def test_minimal_config_defaults():
    config = RunConfigFactory.create_config(MINIMAL)
    assert config.experiment == "solve"
    assert config.grid.d_x == 0 and config.grid.n_v == 12
    assert config.rho0 == 0.1 and config.kappa is None
    assert config.step.dt == 0.05 and config.step.conserve_moments
    assert config.step.cross_stencil == "monotone" and config.step.clamp_mass_budget == 1e-8
    assert config.picard.T_target == 0.1 and config.picard.singular_rule == "lattice"
    assert config.sde.seed == 0 and config.sde.landau_scaling
    assert config.scenario == "maxwellian"
    assert config.core is None and config.probes == []
    assert str(config.out_dir) == "out"
    assert config.params == MINIMAL


def test_seed_and_threads_reach_every_section():
    config = RunConfigFactory.create_config(_with(seed=7, threads=3))
    assert config.sde.seed == 7
    assert config.sde.threads == 3 and config.picard.threads == 3 and config.step.workers == 3


@pytest.mark.parametrize("params,path", [
    (_with(grid={"n_v": 13}), "grid.n_v"),
    (_with(grid={"n_v": True}), "grid.n_v"),
    (_with(grid={"d_x": 1}), "grid.L"),
    (_with(grid={"d_x": 2, "L": 4.0, "n_x": 8}), "grid.d_x"),
    (_with(grid={"spacing": 0.1}), "grid.spacing"),
    (_with(physics={"gamma": -3.5}), "physics.gamma"),
    (_with(physics={"gamma": 0.0}), "physics.gamma"),
    (_with(physics={"kappa": 1.0}), "physics.T_target"),
    (_with(physics={"p_exponent": 0.5}), "physics.p_exponent"),
    (_with(physics={"singular_rule": "pv"}), "physics.singular_rule"),
    (_with(step={"eps": 0.01}), "step"),
    (_with(step={"theta": 2.0}), "step.theta"),
    (_with(sde={"block_size": 7}), "sde.block_size"),
    (_with(experiment="simulate"), "experiment"),
    (_with(experiment="verify"), "output.source"),
    (_with(scenario={"name": "plasma_ball"}), "scenario.name"),
    (_with(probes=[{"t": 0.5, "v": [1.0, 0.0, 0.0]}]), "probes[0].t"),
    (_with(probes=[{"t": 0.05, "v": [1.0, 0.0]}]), "probes[0].v"),
    (_with(verify={"tail_window": [5.0, 2.5]}), "verify.tail_window"),
    (_with(verify={"well_distributed": [1.0, 0.1, 2.0]}), "verify.well_distributed"),
    (_with(monitor={"sup_f": -1.0}), "monitor.sup_f"),
    (_with(monitor={"entropy_rise": 0.0}), "monitor.entropy_rise"),
    (_with(step={"cross_stencil": "upwind"}), "step.cross_stencil"),
    (_with(step={"clamp_mass_budget": -1e-8}), "step.clamp_mass_budget"),
    (_with(scenario={"name": "maxwellian_perturbation", "params": {"amplitud": 0.3}}), "scenario.params.amplitud"),
])
def test_invalid_values_name_their_key(params, path):
    assert _key_path(params) == path


def test_spatial_core_and_probes():
    params = _with(grid={"d_x": 1, "L": 4.0, "n_x": 8},
                   core={"r0": 0.75, "delta0": 1.0},
                   probes=[{"t": 0.1, "x": [1.0], "v": [2.0, 0.0, 0.0]}],
                   experiment="lowerbound")
    config = RunConfigFactory.create_config(params)
    assert config.core.x0 == (2.0,)
    assert config.core.v0 == (0.0, 0.0, 0.0)
    assert config.probes == [(0.1, (1.0,), (2.0, 0.0, 0.0))]
    bad = _with(grid={"d_x": 1, "L": 4.0, "n_x": 8}, core={"x0": [1.0, 2.0], "r0": 0.75, "delta0": 1.0})
    assert _key_path(bad) == "core.x0"
