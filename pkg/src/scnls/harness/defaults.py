"""Default configuration for each experiment kind."""

import math

_LAYER = dict(dim=1, delta=[-1], omega=[1.0], sigma=2.0, eps_list=[0.125, 0.0625, 0.03125],
              lambda_list=[2.0], N=4096, L=8.0, layer_snapshots=8)

DEFAULTS = {
    "inside_layer": dict(_LAYER),
    "general_subquadratic": dict(_LAYER, potential_form="general", general_potential="half_x2_cos_t"),
    "beyond_layer": dict(_LAYER, lambda_list=[1.0, 2.0, 4.0], T=0.8, n_snapshots=80, scatter_N=16384,
                         scatter_L=1280.0, t_ref=128.0, scatter_tol=1e-4, scatter_dt=0.01,
                         scatter_extrapolation=2),
    "matching": dict(_LAYER, lambda_list=[1.0, 2.0, 4.0], T=0.8, scatter_N=16384, scatter_L=1280.0,
                     t_ref=128.0, scatter_tol=1e-4, scatter_dt=0.01, scatter_extrapolation=2),
    "corollary_frame": dict(_LAYER, delta=[1], omega=[1.0], x0=[1.0], xi0=[0.0], T=1.0, N=4096, L=12.0,
                            n_snapshots=20, dt=1.0 / 6400),
    "conservation_suite": dict(dim=1, delta=[1], omega=[1.0], sigma=2.0, eps_list=[0.125], N=1024, L=8.0,
                               T=1.0, n_steps=10000, dt_list=[0.01, 0.005, 0.0025]),
    "rigidity_demo": dict(dim=1, delta=[1], omega=[1.0], eps_list=[0.25], N=512, L=6.0, x0=[0.5],
                          observable_t=0.5, dt_list=[0.01, 0.005, 0.0025]),
    "dispersion_suite": dict(dim=2, delta=[1, 1], omega=[1.0, math.sqrt(2.0)], eps_list=[0.5, 0.25, 0.125],
                             N=512, L=4.75, dt=0.01, r_list=[4.0], probe_times=[0.0, math.pi],
                             control_N=1024, control_L=6.0),
}


def default_config(experiment, **overrides):
    from .config import ExperimentConfig

    data = dict(DEFAULTS[experiment], experiment=experiment)
    data.update(overrides)
    return ExperimentConfig.from_dict(data)
