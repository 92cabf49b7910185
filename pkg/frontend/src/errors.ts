/** Errors the CLI maps to a nonzero exit; anything else is a bug. */
export class FigureError extends Error {}

export class MissingColumn extends FigureError {
  constructor(kind: string, missing: string[], present: string[]) {
    super(
      `${kind}: input is missing column(s) ${missing.join(", ")}; ` +
        `found: ${present.join(", ") || "(none)"}`,
    );
    this.name = "MissingColumn";
  }
}

export class EmptyInput extends FigureError {
  constructor(detail: string) {
    super(`no usable rows: ${detail}`);
    this.name = "EmptyInput";
  }
}

export class UnknownKind extends FigureError {
  constructor(kind: string, known: readonly string[]) {
    super(`unknown chart kind ${JSON.stringify(kind)}; expected one of ${known.join(", ")}`);
    this.name = "UnknownKind";
  }
}
