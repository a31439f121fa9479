from collm.nn import functional
from collm.nn.network import Network

__all__ = ["functional", "Network"]
