# --------------------------------------------------
# Root exception for the symplectic toolkit.
# Each service module declares its own subclasses next to
# the code raising them; the CLI only needs this base type.
# --------------------------------------------------


class SymplecticError(Exception):
    pass
