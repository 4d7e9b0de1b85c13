from abc import ABC, abstractmethod


class EventLoopMachine(ABC):
    """The five entry points every validator state machine answers

    A client transaction, a block timer, a peer block and a side consensus
    decision are the only inputs; `decide` is the only query.
    """

    @abstractmethod
    def handle_receive_event(self, tx, now):
        pass

    @abstractmethod
    def handle_time_expire(self, now):
        pass

    @abstractmethod
    def handle_receive_block(self, block, now):
        pass

    @abstractmethod
    def handle_side_consensus_achieved(self, conflict_index, value, evidence):
        pass

    @abstractmethod
    def decide(self, conflict_index):
        pass
