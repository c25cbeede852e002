from samplers.strategies import (AdaptiveBridge, Bilevel, BleuSLI, Clamp, ConfidenceAware, CosineSLI,
                                 DecaySS, ExponentialDecay, LinearDecay, NoSLI, SigmoidDecay,
                                 SigmoidSmooth, TeacherForcing)
