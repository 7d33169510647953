import numpy as np
from pydantic import BaseModel, ConfigDict, Field

_UINT64_MAX = 2**64 - 1


class RngSeed(BaseModel):
    """Master seed plus stream index; together they fix every random draw.

    Streams are spawned from one :class:`numpy.random.SeedSequence` so that
    distinct ``(master, stream, *keys)`` tuples give statistically
    independent PCG64 generators.
    """

    model_config = ConfigDict(frozen=True)

    master: int = Field(ge=0, le=_UINT64_MAX)
    stream: int = Field(default=0, ge=0)

    def generator(self, *keys: int) -> np.random.Generator:
        """Return the generator for this stream, optionally sub-keyed."""
        seq = np.random.SeedSequence(self.master, spawn_key=(self.stream, *keys))
        return np.random.Generator(np.random.PCG64(seq))

    def with_stream(self, stream: int) -> "RngSeed":
        return RngSeed(master=self.master, stream=stream)

    def derive(self, label: str) -> "RngSeed":
        """Independent master seed for a named purpose (e.g. ``"lhs"``).

        The label is folded into the entropy, so ``derive("lhs")`` and
        ``derive("rhs")`` never share draws.
        """
        words = [self.master, self.stream, *label.encode()]
        state = np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)
        return RngSeed(master=int(state[0]), stream=0)
