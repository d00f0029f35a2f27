"""Bundle of every trainable tensor: the embedding and the AGNN

The optimizer and the checkpoint format see the model as a flat mapping of
named arrays; this module converts between that view and the parameter
objects used by roifeat and agnn.
"""

import numpy as np

from .agnn import AgnnParams
from .core import DEFAULT_FEATURE_DIM
from .roifeat import DEFAULT_POOL, EmbedParams

__all__ = ['TrackModel', 'TENSOR_NAMES', 'REGULARIZED']

TENSOR_NAMES = ('W1', 'W2', 'Wa', 'w_raw', 'projection', 'bias')
REGULARIZED = ('W1', 'W2', 'Wa', 'projection')


class TrackModel(object):
    """Embedding and AGNN parameters used together"""
    def __init__(self, embed, agnn):
        """Initialize from the two parameter sets

        Args:
            embed (EmbedParams): region embedding
            agnn (AgnnParams): graph network weights
        """
        if embed.dim != agnn.dim:
            raise ValueError('embedding dim %d differs from AGNN dim %d'
                             % (embed.dim, agnn.dim))
        self._embed = embed
        self._agnn = agnn

    def _get_embed(self):
        return self._embed
    embed = property(_get_embed)

    def _get_agnn(self):
        return self._agnn
    agnn = property(_get_agnn)

    def _get_dim(self):
        return self._agnn.dim
    dim = property(_get_dim)

    @classmethod
    def init(cls, seed=0, channels=1, pool=DEFAULT_POOL,
             dim=DEFAULT_FEATURE_DIM):
        """A freshly initialized model

        Args:
            seed (int): seed for numpy's default generator
            channels (int): feature map channels
            pool (int): ROI Align grid
            dim (int): feature dimension D
        """
        rng = np.random.default_rng(seed)
        return cls(EmbedParams.init(rng, channels, pool, dim),
                   AgnnParams.init(rng, dim))

    def tensors(self):
        """Returns a dict of named copies of every trainable array"""
        return {'W1': self.agnn.W1.copy(), 'W2': self.agnn.W2.copy(),
                'Wa': self.agnn.Wa.copy(),
                'w_raw': np.array(self.agnn.w_raw),
                'projection': self.embed.projection.copy(),
                'bias': self.embed.bias.copy()}

    def with_tensors(self, tensors):
        """Returns a new model built from a dict shaped like tensors()"""
        return TrackModel(
            EmbedParams(tensors['projection'], tensors['bias'],
                        self.embed.pool),
            AgnnParams(tensors['W1'], tensors['W2'], tensors['Wa'],
                       float(tensors['w_raw'])))

    def reg_norm_sq(self):
        """Squared L2 norm of the weight matrices (no biases, no logit)"""
        t = self.tensors()
        return float(sum(np.sum(t[name] ** 2) for name in REGULARIZED))
