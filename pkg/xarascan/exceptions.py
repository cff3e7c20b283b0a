class XaraError(Exception):
    """ Base class for every error raised by xarascan """


__all__ = ("XaraError",)
