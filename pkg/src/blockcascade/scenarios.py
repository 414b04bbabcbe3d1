"""Ready-made synthetic scenes used by the benchmark command and the tests."""
from .synth import Background, GainRamp, LightSwitch, MovingObject, SceneScript

__all__ = ["moving_object", "gain_ramp", "light_switch", "tracking"]

_TEXTURE = Background(kind="textured", color=(90, 110, 130), texture_amplitude=40, seed=11)


def moving_object(length=300, enter=220, seed=7):
    """160x120 textured scene; one 20x20 square enters at ``enter`` and drifts right."""
    return SceneScript(
        width=160, height=120, length=length, background=_TEXTURE,
        objects=[MovingObject("walker", x=20, y=50, w=20, h=20, color=(220, 40, 40),
                              velocity=(1.0, 0.0), enter=enter)],
        noise_sigma=2.0, seed=seed,
    )


def gain_ramp(train=200, ramp=50, hold=10, factor=1.3, seed=5):
    """No objects; global gain goes 1.0 -> ``factor`` over ``ramp`` frames after training."""
    return SceneScript(
        width=160, height=120, length=train + ramp + hold, background=_TEXTURE,
        gains=[GainRamp(start=train, end=train + ramp, factor=factor)],
        noise_sigma=2.0, seed=seed,
    )


def light_switch(train=200, after=40, seed=3):
    """Background swapped instantaneously at frame ``train``."""
    lit = Background(kind="textured", color=(180, 150, 70), texture_amplitude=50, seed=23)
    return SceneScript(
        width=160, height=120, length=train + after, background=_TEXTURE,
        switches=[LightSwitch(frame=train, background=lit)],
        noise_sigma=2.0, seed=seed,
    )


def tracking(train=200, length=300, seed=9):
    """Two objects crossing paths in opposite directions after training."""
    return SceneScript(
        width=160, height=120, length=length, background=_TEXTURE,
        objects=[
            MovingObject("a", x=10, y=30, w=16, h=16, color=(230, 50, 40),
                         velocity=(1.2, 0.3), enter=train + 5, exit=length),
            MovingObject("b", x=130, y=80, w=14, h=18, color=(40, 220, 60),
                         velocity=(-1.0, -0.2), enter=train + 10, exit=length),
        ],
        noise_sigma=2.0, seed=seed,
    )
