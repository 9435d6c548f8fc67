package game;

public class Board {
    private final char[][] cells = new char[3][3];

    public Board() {
        for (char[] row : cells) java.util.Arrays.fill(row, ' ');
    }

    public boolean place(int r, int c, char mark) {
        if (cells[r][c] != ' ') return false;
        cells[r][c] = mark;
        return true;
    }

    public char winner() {
        for (int i = 0; i < 3; i++) {
            if (cells[i][0] != ' ' && cells[i][0] == cells[i][1] && cells[i][1] == cells[i][2]) return cells[i][0];
            if (cells[0][i] != ' ' && cells[0][i] == cells[1][i] && cells[1][i] == cells[2][i]) return cells[0][i];
        }
        if (cells[1][1] != ' ' && ((cells[0][0] == cells[1][1] && cells[1][1] == cells[2][2])
                || (cells[0][2] == cells[1][1] && cells[1][1] == cells[2][0]))) return cells[1][1];
        return ' ';
    }
}
