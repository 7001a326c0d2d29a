"""Small helpers shared by the demo scripts."""

from scipy.stats import unitary_group

from chanmix.channels import KrausChannel


def random_cptp(dim, n_kraus, rng, label="random"):
    big = unitary_group.rvs(dim * n_kraus, random_state=rng)
    isometry = big[:, :dim]
    kraus = tuple(isometry[i * dim : (i + 1) * dim, :] for i in range(n_kraus))
    return KrausChannel(kraus, label=label)
