from .mot_files import (MotRow, read_rows, parse_det, rows_by_frame,
                        write_rows, write_result)
from .binary import (read_pgm, write_pgm, read_ften, write_ften,
                     read_checkpoint, write_checkpoint)
from .synth import (SynthObject, SynthScenario, SynthSequence, load_scenario,
                    random_scenario, gen_scenario, write_scenario,
                    load_sequence_dir, training_pairs)

__all__ = [
    "MotRow", "read_rows", "parse_det", "rows_by_frame",       # mot_files
    "write_rows", "write_result",
    "read_pgm", "write_pgm", "read_ften", "write_ften",        # binary
    "read_checkpoint", "write_checkpoint",
    "SynthObject", "SynthScenario", "SynthSequence",          # synth
    "load_scenario", "random_scenario", "gen_scenario",
    "write_scenario", "load_sequence_dir", "training_pairs",
]
