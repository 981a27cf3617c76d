from __future__ import annotations

import argparse

from src.dataset import parse_dataset


def main() -> None:
    parser = argparse.ArgumentParser(description="Sanity-check a prediction dataset.")
    parser.add_argument("--csv", required=True, help="Path to the dataset CSV")
    args = parser.parse_args()

    dataset = parse_dataset(args.csv)
    zero_actuals = sum(1 for a in dataset.actuals if a == 0.0)

    print(f"rows={len(dataset)}")
    print(f"prediction_columns={','.join(dataset.column_names)}")
    print(f"zero_actuals={zero_actuals}")
    for name, values in dataset.prediction_columns.items():
        perfect = sum(1 for p, a in zip(values, dataset.actuals) if p == a and a > 0)
        # One perfect prediction is enough to pin GMAPE at 0.
        print(f"column={name} perfect_predictions={perfect} gmape_degenerate={perfect > 0}")


if __name__ == "__main__":
    main()
