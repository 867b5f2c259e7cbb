class ExportError(Exception):
    pass


class EncoderUnavailable(ExportError):
    def __init__(self, name, reason=""):
        super().__init__(f"encoder {name!r} unavailable{': ' + reason if reason else ''}")
        self.name = name


class MalformedRecord(ExportError):
    def __init__(self, record_id, reason):
        super().__init__(f"record {record_id!r}: {reason}")
        self.record_id = record_id


class BadRecipe(ExportError):
    pass
