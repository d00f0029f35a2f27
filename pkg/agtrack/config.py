"""Plain-text run configuration

A config file holds "key = value" lines; "#" starts a comment and blank
lines are skipped. Every key has a default, so a file only names what it
changes.
"""

import dataclasses
import logging
from dataclasses import dataclass

from .errors import ConfigError
from .flow import FlowConfig
from .loss import LossWeights
from .tracker import TrackerConfig
from .train import LrSchedule

__all__ = ['Config', 'load_config', 'parse_config']

logger = logging.getLogger(__name__)

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


@dataclass(frozen=True)
class Config:
    # association
    margin: float = 0.2
    k: int = 10
    min_conf: float = 0.
    realign_features: bool = True
    use_flow: bool = True
    use_gnn: bool = True
    adaptive: bool = True
    # model
    feature_dim: int = 256
    pool: int = 7
    seed: int = 0
    # loss
    alpha: float = 25.
    beta: float = 1.
    gamma: float = 50.
    delta: float = 50.
    epsilon: float = 0.01
    # flow
    window: int = 120
    levels: int = 3
    max_iters: int = 10
    flow_eps: float = 0.01
    # training
    lr_max: float = 0.05
    lr_min: float = 2.5e-7
    period_epochs: int = 30
    total_epochs: int = 3000
    checkpoint_every: int = 100
    # evaluation and synthetic data
    iou_thresh: float = 0.5
    min_visibility: float = 0.
    jitter: float = 1.
    drop_rate: float = 0.02

    def flow_config(self):
        return FlowConfig(self.window, self.levels, self.max_iters,
                          self.flow_eps)

    def tracker_config(self):
        return TrackerConfig(k=self.k, margin=self.margin,
                             realign_features=self.realign_features,
                             flow=self.flow_config(),
                             feature_dim=self.feature_dim,
                             use_flow=self.use_flow, use_gnn=self.use_gnn,
                             adaptive=self.adaptive, min_conf=self.min_conf)

    def loss_weights(self):
        return LossWeights(self.alpha, self.beta, self.gamma, self.delta,
                           self.epsilon)

    def schedule(self):
        return LrSchedule(self.lr_max, self.lr_min, self.period_epochs,
                          self.total_epochs)


_TYPES = {f.name: f.type for f in dataclasses.fields(Config)}


def _convert(key, text):
    kind = _TYPES[key]
    if kind in (bool, 'bool'):
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError('expected a boolean, got %r' % text)
    if kind in (int, 'int'):
        return int(text)
    return float(text)


def parse_config(lines, source='<config>'):
    """Builds a Config from an iterable of lines

    Raises:
        ConfigError: on an unknown key, a bad value, or a line without "="
    """
    values = {}
    for lineno, raw in enumerate(lines, 1):
        text = raw.split('#', 1)[0].strip()
        if not text:
            continue
        if '=' not in text:
            raise ConfigError('%s line %d: expected "key = value"'
                              % (source, lineno))
        key, value = (s.strip() for s in text.split('=', 1))
        if key not in _TYPES:
            raise ConfigError('%s line %d: unknown key %r'
                              % (source, lineno, key))
        try:
            values[key] = _convert(key, value)
        except ValueError as e:
            raise ConfigError('%s line %d: %s: %s' % (source, lineno, key, e))
    try:
        cfg = Config(**values)
        # validate the derived settings up front
        cfg.tracker_config()
        cfg.loss_weights()
        cfg.schedule()
    except ValueError as e:
        raise ConfigError('%s: %s' % (source, e))
    return cfg


def load_config(path=None):
    """Reads a config file; None gives the defaults"""
    if path is None:
        return Config()
    with open(path) as f:
        cfg = parse_config(f, path)
    logger.info('loaded config %s', path)
    return cfg
