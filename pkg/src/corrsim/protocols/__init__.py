from .agreement import (AgreementEval, AgreementProtocol, agreement_from_dict, best_agreement,
                        constant_agreement, disj_agreement, eval_agreement, lift_agreement,
                        optimize_agreement, perf_agreement)
from .collision import (AgreementCollision, AgreementExtraction, AmplifiedCollision, BirthdayCollision,
                        CollisionEval, CollisionProtocol, LiftedCollision, ScaledCollision, TableCollision,
                        agreement_from_collision, amplify_collision, birthday_collision,
                        collision_from_agreement, collision_from_dict, eval_collision, lift_collision,
                        pick_uniform, protocol_from_dict, scale_domain, symmetrize, symmetrize_repetitions,
                        uniformity_pvalue)

__all__ = [
    "AgreementCollision", "AgreementEval", "AgreementExtraction", "AgreementProtocol", "AmplifiedCollision",
    "BirthdayCollision", "CollisionEval", "CollisionProtocol", "LiftedCollision", "ScaledCollision",
    "TableCollision", "agreement_from_collision", "agreement_from_dict", "amplify_collision",
    "best_agreement", "birthday_collision", "collision_from_agreement", "collision_from_dict",
    "constant_agreement", "disj_agreement", "eval_agreement", "eval_collision", "lift_agreement",
    "lift_collision", "optimize_agreement", "perf_agreement", "pick_uniform", "protocol_from_dict",
    "scale_domain", "symmetrize", "symmetrize_repetitions", "uniformity_pvalue",
]
