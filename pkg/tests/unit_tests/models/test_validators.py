from src.models.enums import ShareType
from src.models.validators import parse_image_size, parse_pos_embed, parse_share_type, validate_dataset_name


class TestParseShareType:
    def test_none_input(self) -> None:
        assert parse_share_type(None) is None

    def test_letters(self) -> None:
        assert parse_share_type("A") is ShareType.ALL
        assert parse_share_type("s") is ShareType.SPECIFIC
        assert parse_share_type(" T ") is ShareType.TASK

    def test_long_names(self) -> None:
        assert parse_share_type("task") is ShareType.TASK
        assert parse_share_type("all") is ShareType.ALL

    def test_invalid_string(self) -> None:
        assert parse_share_type("X") is None


class TestParsePosEmbed:
    def test_none_input(self) -> None:
        assert parse_pos_embed(None) is None

    def test_bool_input(self) -> None:
        assert parse_pos_embed(False) is False

    def test_strings(self) -> None:
        assert parse_pos_embed("shared") is True
        assert parse_pos_embed("Separate") is False

    def test_invalid_string(self) -> None:
        assert parse_pos_embed("maybe") is None


class TestParseImageSize:
    def test_valid(self) -> None:
        assert parse_image_size("48x32") == (48, 32)
        assert parse_image_size(" 32 X 32 ") == (32, 32)

    def test_tuple_passthrough(self) -> None:
        assert parse_image_size((16, 8)) == (16, 8)

    def test_invalid(self) -> None:
        assert parse_image_size("48 by 32") is None


class TestValidateDatasetName:
    def test_valid_names(self) -> None:
        assert validate_dataset_name("market_1501")
        assert validate_dataset_name("coco-pose")

    def test_invalid_names(self) -> None:
        assert not validate_dataset_name("")
        assert not validate_dataset_name(None)
        assert not validate_dataset_name("with.dot")
        assert not validate_dataset_name("with space")
