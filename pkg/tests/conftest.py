"""Shared builders for small synthetic instances used across test modules."""

import numpy as np

from starqwsr.model import (
    ChannelRealization,
    DecodingOrder,
    Scenario,
    StarConfig,
    UserSpec,
)


def make_scenario(
    n=2,
    m=3,
    noise_power=1.0,
    p_max=10.0,
    protocol="ES",
    sides=("reflection", "transmission"),
    arrival_rates=None,
    **kw,
):
    users = tuple(
        UserSpec(id=i, side=s, position=(50.0 - 100.0 * i, 250.0, 0.0))
        for i, s in enumerate(sides)
    )
    if arrival_rates is None:
        arrival_rates = (2.0,) * len(users)
    return Scenario(
        num_antennas=n,
        num_elements=m,
        users=users,
        bs_position=(250.0, 0.0, 22.0),
        ris_position=(0.0, 250.0, 10.0),
        p_max=p_max,
        noise_power=noise_power,
        arrival_rates=arrival_rates,
        protocol=protocol,
        **kw,
    )


def rand_channel(rng, k, m, n, scale=1.0):
    g = scale * (rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n)))
    v = scale * (rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m)))
    return ChannelRealization(g=g, v=v)


def rand_star(rng, m, protocol="ES"):
    beta_r = rng.uniform(0.05, 0.95, m)
    return StarConfig(
        beta_r=beta_r,
        beta_t=1.0 - beta_r,
        theta_r=rng.uniform(0, 2 * np.pi, m),
        theta_t=rng.uniform(0, 2 * np.pi, m),
        protocol=protocol,
    )


def unit_instance(beta=1.0, w=2.0):
    """N = M = 1 instance with G = v = [1], theta = 0."""
    scen = make_scenario(n=1, m=1)
    chan = ChannelRealization(g=np.array([[1.0 + 0j]]), v=np.array([[1.0 + 0j], [1.0 + 0j]]).reshape(2, 1))
    star = StarConfig(
        beta_r=np.array([beta]),
        beta_t=np.array([1.0 - beta]),
        theta_r=np.zeros(1),
        theta_t=np.zeros(1),
    )
    order = DecodingOrder((0, 1))
    return scen, chan, star, order, np.array([[w + 0j]])
