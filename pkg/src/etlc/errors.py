"""Exception hierarchy.

Every error a chain or contract can report is a subclass of
:class:`ETLCError`.  The public chain turns these into rejection receipts
carrying the class name, so names here are part of the transcript format.
"""


class ETLCError(Exception):
    """Base class for all protocol-level errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# -- crypto ---------------------------------------------------------------

class CryptoError(ETLCError):
    pass


class EmptyMessage(CryptoError):
    pass


class NotRobustCiphertext(CryptoError):
    pass


class InconsistentInputs(CryptoError):
    pass


class InvalidPublicKey(CryptoError):
    pass


# -- private chain ---------------------------------------------------------

class PrivateChainError(ETLCError):
    pass


class UnknownObject(PrivateChainError):
    pass


class QuorumNotMet(PrivateChainError):
    pass


class NoLiveEntry(PrivateChainError):
    pass


class NotAMember(PrivateChainError):
    pass


class NotAuthorized(PrivateChainError):
    pass


class StaleVersion(PrivateChainError):
    pass


class BadProof(PrivateChainError):
    pass


class BadCiphertext(PrivateChainError):
    pass


class AccessDenied(PrivateChainError):
    pass


# -- public chain ----------------------------------------------------------

class PublicChainError(ETLCError):
    pass


class InsufficientFunds(PublicChainError):
    pass


class NonPositiveAmount(PublicChainError):
    pass


class UnknownAccount(PublicChainError):
    pass


class UnknownContract(PublicChainError):
    pass


class UnknownOperation(PublicChainError):
    pass


class MalformedPayload(PublicChainError):
    pass


# -- ETLC contracts --------------------------------------------------------

class ContractError(PublicChainError):
    pass


class DuplicateSession(ContractError):
    pass


class UnknownSession(ContractError):
    pass


class NotRegistered(ContractError):
    pass


class Unauthorized(ContractError):
    """Caller is not the party the operation belongs to."""


class BadAuthSigs(ContractError):
    pass


class WrongState(ContractError):
    pass


class DeadlineTooTight(ContractError):
    pass


class SignContractMissing(ContractError):
    pass


class PastDeadline(ContractError):
    pass


class BadSignature(ContractError):
    pass


class SignatureMismatch(ContractError):
    pass


class WindowClosed(ContractError):
    pass


class ChallengeUpheld(ContractError):
    pass


# -- harness ---------------------------------------------------------------

class HarnessError(ETLCError):
    pass


class ParseError(HarnessError):
    pass


class InvalidScenario(HarnessError):
    pass


class MalformedTranscript(HarnessError):
    pass
