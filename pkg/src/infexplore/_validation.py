"""Input checks shared by the public functions and estimators."""
import math
import numbers


def check_scalar_in(value, name, low=-math.inf, high=math.inf, *,
                    closed_low=True, closed_high=True):
    """Return ``value`` as float after checking it lies in the given interval.

    Raises ``ValueError`` (not ``TypeError``) for out-of-range values so the
    CLI can report them as usage problems.
    """
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if math.isnan(value):
        raise ValueError(f"{name} must not be NaN")
    ok_low = value >= low if closed_low else value > low
    ok_high = value <= high if closed_high else value < high
    if not (ok_low and ok_high):
        lb = "[" if closed_low else "("
        rb = "]" if closed_high else ")"
        raise ValueError(f"{name}={value!r} outside {lb}{low}, {high}{rb}")
    return value


def check_probability(value, name, *, allow_zero=False, allow_one=True):
    return check_scalar_in(value, name, 0.0, 1.0,
                           closed_low=allow_zero, closed_high=allow_one)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ValueError(f"{name}={value} must be >= {minimum}")
    return value


def check_env(env):
    """Duck-typed check that ``env`` can serve the pull interface."""
    for attr in ("new_arm", "pull", "pull_sum", "pull_arms", "samples_used"):
        if not hasattr(env, attr):
            raise TypeError(f"object of type {type(env).__name__} is not a bandit "
                            f"environment (missing {attr!r})")
    return env


def ceil_int(x, rel_tol=1e-9):
    """Ceiling that ignores floating-point fuzz just above an integer."""
    r = round(x)
    if abs(x - r) <= rel_tol * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def floor_int(x, rel_tol=1e-9):
    """Floor that ignores floating-point fuzz just below an integer."""
    r = round(x)
    if abs(x - r) <= rel_tol * max(1.0, abs(x)):
        return int(r)
    return int(math.floor(x))
