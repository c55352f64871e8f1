"""Exception hierarchy shared by all hgentangle modules."""


class HGEntangleError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameter(HGEntangleError, ValueError):
    pass


class InvalidModeSet(HGEntangleError, ValueError):
    pass


class UnknownMode(HGEntangleError, KeyError):
    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class UnphysicalState(HGEntangleError, ValueError):
    pass


class OrderMismatch(HGEntangleError, ValueError):
    pass


class InvalidMask(HGEntangleError, ValueError):
    pass


class InvalidConfig(HGEntangleError, ValueError):
    pass


class CalibrationError(HGEntangleError, ValueError):
    pass


class NoiseFloorError(HGEntangleError, ValueError):
    pass


class InvalidInput(HGEntangleError, ValueError):
    pass
