import inspect
from collections import defaultdict
from typing import Any, Callable, Dict

from ..errors import InvalidConfig

GLOBAL_CONFIG: Dict[str, Dict[str, Any]] = defaultdict(dict)


def register(group: str, name: str = None, force: bool = False) -> Callable:
    """
    Register a class or factory function under ``GLOBAL_CONFIG[group][name]``.

    group
        kind of component, e.g. ``"scorer"``
    force
        overwrite an existing registration instead of failing
    """

    def decorator(foo):
        if not (inspect.isclass(foo) or inspect.isfunction(foo)):
            raise ValueError(f"Do not support {type(foo)} register")
        register_name = foo.__name__ if name is None else name
        if not force:
            assert register_name not in GLOBAL_CONFIG[group], f"{group}/{register_name} has been already registered"
        GLOBAL_CONFIG[group][register_name] = foo
        return foo

    return decorator


def create_from_config(group: str, spec: Any, **kwargs) -> Any:
    """
    Build a registered component.

    ``spec`` is either a registered name or a mapping ``{"type": name, **init_kwargs}``;
    ``kwargs`` are passed on top of the mapping's arguments.
    """
    if isinstance(spec, str):
        type_name, init_kwargs = spec, {}
    elif isinstance(spec, dict) and "type" in spec:
        init_kwargs = {k: v for k, v in spec.items() if k != "type"}
        type_name = spec["type"]
    else:
        raise InvalidConfig(group, f"expected a name or a mapping with 'type', got {spec!r}")

    if type_name not in GLOBAL_CONFIG[group]:
        raise InvalidConfig(group, f"'{type_name}' is not registered; available: {sorted(GLOBAL_CONFIG[group])}")

    return GLOBAL_CONFIG[group][type_name](**{**init_kwargs, **kwargs})
