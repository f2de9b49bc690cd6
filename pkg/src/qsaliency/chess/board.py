"""Chess position representation, FEN parsing, and legal move generation.

Squares are indexed 0..63 with a1 = 0, b1 = 1, ..., h8 = 63.  Pieces are
single FEN letters: uppercase white (PNBRQK), lowercase black (pnbrqk).
Moves use long algebraic coordinate notation, e.g. ``e2e4`` or ``e7e8q``.

Move generation is copy-make: pseudo-legal moves are generated per piece,
then filtered by applying each to a copy and rejecting those that leave the
mover's king attacked.  Castling, en passant, and promotion are supported;
there is no support for chess variants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

WHITE = "w"
BLACK = "b"

FILES = "abcdefgh"
RANKS = "12345678"

WHITE_PIECES = "PNBRQK"
BLACK_PIECES = "pnbrqk"
PIECES = WHITE_PIECES + BLACK_PIECES

# (file delta, rank delta) rays
_ROOK_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_BISHOP_DIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
_KING_DIRS = _ROOK_DIRS + _BISHOP_DIRS
_KNIGHT_JUMPS = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))


class FenError(ValueError):
    """Malformed or invalid FEN text."""


class IllegalMoveError(ValueError):
    """Move is not legal in the given position."""


def square_index(name: str) -> int:
    """'a1' -> 0 ... 'h8' -> 63."""
    if len(name) != 2 or name[0] not in FILES or name[1] not in RANKS:
        raise ValueError(f"bad square name {name!r}")
    return FILES.index(name[0]) + 8 * RANKS.index(name[1])


def square_name(index: int) -> str:
    if not 0 <= index <= 63:
        raise ValueError(f"square index out of range: {index}")
    return FILES[index % 8] + RANKS[index // 8]


def _color_of(piece: str) -> str:
    return WHITE if piece.isupper() else BLACK


@dataclass(frozen=True)
class Move:
    """A coordinate move: from-square, to-square, optional promotion piece."""

    from_sq: int
    to_sq: int
    promotion: str = ""  # one of "qrbn" or empty

    @property
    def uci(self) -> str:
        return square_name(self.from_sq) + square_name(self.to_sq) + self.promotion

    @classmethod
    def from_uci(cls, text: str) -> "Move":
        if len(text) not in (4, 5):
            raise ValueError(f"bad move token {text!r}")
        promo = text[4:] if len(text) == 5 else ""
        if promo and promo not in "qrbn":
            raise ValueError(f"bad promotion piece in {text!r}")
        return cls(square_index(text[:2]), square_index(text[2:4]), promo)

    def __str__(self) -> str:
        return self.uci


class ChessPosition:
    """Immutable full board state: placement, side to move, castling, en passant.

    Construct via :func:`parse_fen` or :meth:`ChessPosition.initial`;
    ``apply_move`` and ``remove_piece`` return new positions.
    """

    __slots__ = ("board", "side_to_move", "castling", "ep_square", "halfmove", "fullmove")

    def __init__(
        self,
        board: Tuple[Optional[str], ...],
        side_to_move: str,
        castling: str,
        ep_square: Optional[int],
        halfmove: int,
        fullmove: int,
    ) -> None:
        object.__setattr__(self, "board", board)
        object.__setattr__(self, "side_to_move", side_to_move)
        object.__setattr__(self, "castling", castling)
        object.__setattr__(self, "ep_square", ep_square)
        object.__setattr__(self, "halfmove", halfmove)
        object.__setattr__(self, "fullmove", fullmove)

    def __setattr__(self, name, value):  # noqa: D105
        raise AttributeError("ChessPosition is immutable")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ChessPosition):
            return NotImplemented
        return emit_fen(self) == emit_fen(other)

    def __hash__(self) -> int:
        return hash(emit_fen(self))

    @classmethod
    def initial(cls) -> "ChessPosition":
        return parse_fen("rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1")

    def piece_at(self, square: int) -> Optional[str]:
        return self.board[square]

    def occupied_squares(self) -> List[int]:
        return [sq for sq in range(64) if self.board[sq] is not None]

    def king_square(self, color: str) -> int:
        target = "K" if color == WHITE else "k"
        for sq in range(64):
            if self.board[sq] == target:
                return sq
        raise ValueError(f"no {color} king on the board")

    # -- attack detection -------------------------------------------------

    def is_attacked(self, square: int, by_color: str) -> bool:
        """True if any piece of ``by_color`` attacks ``square``."""
        f, r = square % 8, square // 8
        board = self.board

        # Pawns: a white pawn on (f+-1, r-1) attacks square, etc.
        pawn_rank = r - 1 if by_color == WHITE else r + 1
        pawn = "P" if by_color == WHITE else "p"
        if 0 <= pawn_rank <= 7:
            for pf in (f - 1, f + 1):
                if 0 <= pf <= 7 and board[pf + 8 * pawn_rank] == pawn:
                    return True

        knight = "N" if by_color == WHITE else "n"
        for df, dr in _KNIGHT_JUMPS:
            nf, nr = f + df, r + dr
            if 0 <= nf <= 7 and 0 <= nr <= 7 and board[nf + 8 * nr] == knight:
                return True

        king = "K" if by_color == WHITE else "k"
        for df, dr in _KING_DIRS:
            nf, nr = f + df, r + dr
            if 0 <= nf <= 7 and 0 <= nr <= 7 and board[nf + 8 * nr] == king:
                return True

        sliders = (
            ("R" if by_color == WHITE else "r", "Q" if by_color == WHITE else "q", _ROOK_DIRS),
            ("B" if by_color == WHITE else "b", "Q" if by_color == WHITE else "q", _BISHOP_DIRS),
        )
        for piece, queen, dirs in sliders:
            for df, dr in dirs:
                nf, nr = f + df, r + dr
                while 0 <= nf <= 7 and 0 <= nr <= 7:
                    occupant = board[nf + 8 * nr]
                    if occupant is not None:
                        if occupant == piece or occupant == queen:
                            return True
                        break
                    nf += df
                    nr += dr
        return False

    def in_check(self, color: Optional[str] = None) -> bool:
        color = color or self.side_to_move
        other = BLACK if color == WHITE else WHITE
        return self.is_attacked(self.king_square(color), other)

    # -- move generation ---------------------------------------------------

    def _pseudo_legal_moves(self) -> Iterator[Move]:
        us = self.side_to_move
        own = str.isupper if us == WHITE else str.islower
        board = self.board
        for sq in range(64):
            piece = board[sq]
            if piece is None or not own(piece):
                continue
            kind = piece.upper()
            f, r = sq % 8, sq // 8
            if kind == "P":
                yield from self._pawn_moves(sq, f, r, us)
            elif kind == "N":
                for df, dr in _KNIGHT_JUMPS:
                    nf, nr = f + df, r + dr
                    if 0 <= nf <= 7 and 0 <= nr <= 7:
                        target = board[nf + 8 * nr]
                        if target is None or not own(target):
                            yield Move(sq, nf + 8 * nr)
            elif kind == "K":
                for df, dr in _KING_DIRS:
                    nf, nr = f + df, r + dr
                    if 0 <= nf <= 7 and 0 <= nr <= 7:
                        target = board[nf + 8 * nr]
                        if target is None or not own(target):
                            yield Move(sq, nf + 8 * nr)
                yield from self._castling_moves(us)
            else:
                dirs = {"R": _ROOK_DIRS, "B": _BISHOP_DIRS, "Q": _KING_DIRS}[kind]
                for df, dr in dirs:
                    nf, nr = f + df, r + dr
                    while 0 <= nf <= 7 and 0 <= nr <= 7:
                        target = board[nf + 8 * nr]
                        if target is None:
                            yield Move(sq, nf + 8 * nr)
                        else:
                            if not own(target):
                                yield Move(sq, nf + 8 * nr)
                            break
                        nf += df
                        nr += dr

    def _pawn_moves(self, sq: int, f: int, r: int, us: str) -> Iterator[Move]:
        board = self.board
        step = 1 if us == WHITE else -1
        start_rank = 1 if us == WHITE else 6
        promo_rank = 7 if us == WHITE else 0
        enemy = str.islower if us == WHITE else str.isupper

        def emit(from_sq: int, to_sq: int) -> Iterator[Move]:
            if to_sq // 8 == promo_rank:
                for promo in "qrbn":
                    yield Move(from_sq, to_sq, promo)
            else:
                yield Move(from_sq, to_sq)

        one = sq + 8 * step
        if board[one] is None:
            yield from emit(sq, one)
            two = sq + 16 * step
            if r == start_rank and board[two] is None:
                yield Move(sq, two)
        for df in (-1, 1):
            nf = f + df
            if not 0 <= nf <= 7:
                continue
            to_sq = nf + 8 * (r + step)
            if not 0 <= to_sq <= 63:
                continue
            target = board[to_sq]
            if target is not None and enemy(target):
                yield from emit(sq, to_sq)
            elif target is None and to_sq == self.ep_square:
                yield Move(sq, to_sq)

    def _castling_moves(self, us: str) -> Iterator[Move]:
        board = self.board
        them = BLACK if us == WHITE else WHITE
        if us == WHITE:
            king_sq, rank_base = 4, 0
            kingside, queenside = "K", "Q"
        else:
            king_sq, rank_base = 60, 56
            kingside, queenside = "k", "q"
        if board[king_sq] != ("K" if us == WHITE else "k"):
            return
        if self.is_attacked(king_sq, them):
            return
        if kingside in self.castling:
            f1, g1 = rank_base + 5, rank_base + 6
            if (
                board[f1] is None
                and board[g1] is None
                and not self.is_attacked(f1, them)
                and not self.is_attacked(g1, them)
            ):
                yield Move(king_sq, g1)
        if queenside in self.castling:
            d1, c1, b1 = rank_base + 3, rank_base + 2, rank_base + 1
            if (
                board[d1] is None
                and board[c1] is None
                and board[b1] is None
                and not self.is_attacked(d1, them)
                and not self.is_attacked(c1, them)
            ):
                yield Move(king_sq, c1)

    def apply_move(self, move: Move) -> "ChessPosition":
        """Apply a pseudo-legal move, returning the successor position.

        Does not itself verify legality; use :func:`legal_moves` first or
        :meth:`push_uci` for validated application.
        """
        board = list(self.board)
        us = self.side_to_move
        piece = board[move.from_sq]
        if piece is None:
            raise IllegalMoveError(f"no piece on {square_name(move.from_sq)}")
        captured = board[move.to_sq]
        is_pawn = piece.upper() == "P"

        new_ep: Optional[int] = None
        board[move.from_sq] = None
        board[move.to_sq] = piece

        if is_pawn:
            if move.to_sq == self.ep_square and captured is None and (move.to_sq - move.from_sq) % 8 != 0:
                # En passant: the captured pawn sits behind the target square.
                captured_sq = move.to_sq - 8 if us == WHITE else move.to_sq + 8
                captured = board[captured_sq]
                board[captured_sq] = None
            if abs(move.to_sq - move.from_sq) == 16:
                new_ep = (move.from_sq + move.to_sq) // 2
            if move.promotion:
                board[move.to_sq] = move.promotion.upper() if us == WHITE else move.promotion

        if piece == "K":
            if move.from_sq == 4 and move.to_sq == 6:
                board[7], board[5] = None, "R"
            elif move.from_sq == 4 and move.to_sq == 2:
                board[0], board[3] = None, "R"
        elif piece == "k":
            if move.from_sq == 60 and move.to_sq == 62:
                board[63], board[61] = None, "r"
            elif move.from_sq == 60 and move.to_sq == 58:
                board[56], board[59] = None, "r"

        castling = self.castling
        if piece == "K":
            castling = castling.replace("K", "").replace("Q", "")
        elif piece == "k":
            castling = castling.replace("k", "").replace("q", "")
        for rook_sq, flag in ((7, "K"), (0, "Q"), (63, "k"), (56, "q")):
            if move.from_sq == rook_sq or move.to_sq == rook_sq:
                castling = castling.replace(flag, "")

        halfmove = 0 if (is_pawn or captured is not None) else self.halfmove + 1
        fullmove = self.fullmove + (1 if us == BLACK else 0)
        return ChessPosition(
            tuple(board),
            BLACK if us == WHITE else WHITE,
            castling,
            new_ep,
            halfmove,
            fullmove,
        )

    def push_uci(self, token: str) -> "ChessPosition":
        move = Move.from_uci(token)
        if move.uci not in legal_moves(self):
            raise IllegalMoveError(f"{token} is not legal in {emit_fen(self)}")
        return self.apply_move(move)

    def remove_piece(self, square: int) -> "ChessPosition":
        """Return the position with the piece on ``square`` deleted.

        Clears castling rights tied to a removed rook, and the en-passant
        square if the removed pawn was the double-stepper.  Does not check
        resulting validity; see :func:`qsaliency.chess.perturb`.
        """
        piece = self.board[square]
        if piece is None:
            raise ValueError(f"no piece on {square_name(square)}")
        board = list(self.board)
        board[square] = None
        castling = self.castling
        for rook_sq, flag, rook in ((7, "K", "R"), (0, "Q", "R"), (63, "k", "r"), (56, "q", "r")):
            if square == rook_sq and piece == rook:
                castling = castling.replace(flag, "")
        ep = self.ep_square
        if ep is not None:
            double_stepper_sq = ep - 8 if ep // 8 == 5 else ep + 8
            if square == double_stepper_sq:
                ep = None
        return ChessPosition(tuple(board), self.side_to_move, castling, ep, self.halfmove, self.fullmove)


def legal_moves(pos: ChessPosition) -> List[str]:
    """Full legal move set in UCI long algebraic, deterministic order.

    Empty for checkmate and stalemate.
    """
    us = pos.side_to_move
    result = []
    for move in pos._pseudo_legal_moves():
        successor = pos.apply_move(move)
        if not successor.in_check(us):
            result.append(move.uci)
    return result


def validate_position(pos: ChessPosition) -> None:
    """Raise FenError if the position breaks a structural invariant.

    Checks: exactly one king per side, no pawns on the back ranks, side not
    to move not in check, castling rights consistent with king and rook
    placement, en-passant square consistent with a just-made double step.
    """
    board = pos.board
    for target, label in (("K", "white king"), ("k", "black king")):
        count = sum(1 for p in board if p == target)
        if count != 1:
            raise FenError(f"expected exactly one {label}, found {count}")
    for sq in list(range(0, 8)) + list(range(56, 64)):
        if board[sq] in ("P", "p"):
            raise FenError(f"pawn on back rank at {square_name(sq)}")
    mover = pos.side_to_move
    waiter = BLACK if mover == WHITE else WHITE
    if pos.is_attacked(pos.king_square(waiter), mover):
        raise FenError("side not to move is in check")
    for flag, king_sq, king, rook_sq, rook in (
        ("K", 4, "K", 7, "R"),
        ("Q", 4, "K", 0, "R"),
        ("k", 60, "k", 63, "r"),
        ("q", 60, "k", 56, "r"),
    ):
        if flag in pos.castling and (board[king_sq] != king or board[rook_sq] != rook):
            raise FenError(f"castling right {flag!r} without king/rook in place")
    ep = pos.ep_square
    if ep is not None:
        rank = ep // 8
        if rank == 5:  # black just double-stepped (e.g. b7b5 -> target b6); white to move
            pawn_sq, origin_sq, pawn, expected_mover = ep - 8, ep + 8, "p", WHITE
        elif rank == 2:  # white just double-stepped (e.g. e2e4 -> target e3); black to move
            pawn_sq, origin_sq, pawn, expected_mover = ep + 8, ep - 8, "P", BLACK
        else:
            raise FenError(f"en-passant square on wrong rank: {square_name(ep)}")
        if pos.side_to_move != expected_mover:
            raise FenError("en-passant square inconsistent with side to move")
        if board[ep] is not None or board[origin_sq] is not None or board[pawn_sq] != pawn:
            raise FenError("en-passant square without a matching double-stepped pawn")


def parse_fen(text: str) -> ChessPosition:
    """Parse a 6-field FEN string into a validated ChessPosition."""
    fields = text.split()
    if len(fields) != 6:
        raise FenError(f"expected 6 FEN fields, got {len(fields)}")
    placement, side, castling, ep_text, halfmove_text, fullmove_text = fields

    rows = placement.split("/")
    if len(rows) != 8:
        raise FenError(f"expected 8 ranks, got {len(rows)}")
    board: List[Optional[str]] = [None] * 64
    for row_idx, row in enumerate(rows):
        rank = 7 - row_idx
        file_idx = 0
        for ch in row:
            if ch.isdigit():
                if ch == "0" or ch == "9":
                    raise FenError(f"bad rank run length {ch!r}")
                file_idx += int(ch)
            elif ch in PIECES:
                if file_idx > 7:
                    raise FenError(f"rank {rank + 1} overflows")
                board[file_idx + 8 * rank] = ch
                file_idx += 1
            else:
                raise FenError(f"bad placement character {ch!r}")
        if file_idx != 8:
            raise FenError(f"rank {rank + 1} has {file_idx} files")

    if side not in (WHITE, BLACK):
        raise FenError(f"bad side to move {side!r}")

    if castling != "-":
        seen = set()
        for ch in castling:
            if ch not in "KQkq" or ch in seen:
                raise FenError(f"bad castling field {castling!r}")
            seen.add(ch)
        castling = "".join(c for c in "KQkq" if c in seen)
    else:
        castling = ""

    ep_square: Optional[int] = None
    if ep_text != "-":
        try:
            ep_square = square_index(ep_text)
        except ValueError as exc:
            raise FenError(str(exc)) from exc

    try:
        halfmove = int(halfmove_text)
        fullmove = int(fullmove_text)
    except ValueError as exc:
        raise FenError(f"bad move counters {halfmove_text!r}/{fullmove_text!r}") from exc
    if halfmove < 0 or fullmove < 1:
        raise FenError(f"bad move counters {halfmove}/{fullmove}")

    pos = ChessPosition(tuple(board), side, castling, ep_square, halfmove, fullmove)
    validate_position(pos)
    return pos


def emit_fen(pos: ChessPosition) -> str:
    """Serialize to canonical FEN (castling in KQkq order, '-' when empty)."""
    rows = []
    for rank in range(7, -1, -1):
        row = ""
        empty = 0
        for file_idx in range(8):
            piece = pos.board[file_idx + 8 * rank]
            if piece is None:
                empty += 1
            else:
                if empty:
                    row += str(empty)
                    empty = 0
                row += piece
        if empty:
            row += str(empty)
        rows.append(row)
    castling = pos.castling if pos.castling else "-"
    ep = square_name(pos.ep_square) if pos.ep_square is not None else "-"
    return " ".join(
        ["/".join(rows), pos.side_to_move, castling, ep, str(pos.halfmove), str(pos.fullmove)]
    )
